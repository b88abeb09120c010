use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use fuzzkd::config::ExperimentConfig;
use fuzzkd::dataset::{balance, split as split_tree, SplitName};
use fuzzkd::imaging::io::{is_image_path, load_image, save_png};
use fuzzkd::imaging::{fuse_standardized, gamma_correct, hist_equalize, rescale_unit, to_byte};
use fuzzkd::{Error, Result};
use rayon::prelude::*;

/// Image files under `root`, as sorted `/`-separated relative paths.
fn list_images(root: &Path) -> Result<Vec<String>> {
    fn walk(dir: &Path, prefix: &str, out: &mut Vec<String>) -> Result<()> {
        let entries = std::fs::read_dir(dir).map_err(|e| io_error(dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| io_error(dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let rel = if prefix.is_empty() {
                name
            } else {
                format!("{prefix}/{name}")
            };
            let path = entry.path();
            if path.is_dir() {
                walk(&path, &rel, out)?;
            } else if is_image_path(&path) {
                out.push(rel);
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, "", &mut out)?;
    out.sort();
    Ok(out)
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn png_name(rel: &str) -> PathBuf {
    PathBuf::from(rel).with_extension("png")
}

fn is_png(rel: &str) -> bool {
    Path::new(rel)
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Writes `out/pix1` (gamma) and, with histogram equalization enabled,
/// `out/pix2` (equalized pix1). Identity gamma copies PNG inputs verbatim.
pub fn enhance(cfg: &ExperimentConfig, input: &Path, output: &Path) -> Result<()> {
    let files = list_images(input)?;
    if files.is_empty() {
        return Err(Error::Dataset(format!(
            "no images under {}",
            input.display()
        )));
    }
    let params = cfg.imaging.gamma_params();
    let identity = params.gamma == 1.0 && params.scale == 1.0;
    let results: Vec<Result<()>> = files
        .par_iter()
        .map(|rel| {
            let src = input.join(rel);
            let img = load_image(&src)?;
            let pix1_path = output.join("pix1").join(png_name(rel));
            let pix1 = to_byte(&gamma_correct(&rescale_unit(&img)?, &params)?);
            if identity && is_png(rel) {
                if let Some(parent) = pix1_path.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
                }
                std::fs::copy(&src, &pix1_path).map_err(|e| io_error(&pix1_path, e))?;
            } else {
                save_png(&pix1, &pix1_path)?;
            }
            if cfg.imaging.histeq {
                save_png(
                    &hist_equalize(&pix1)?,
                    &output.join("pix2").join(png_name(rel)),
                )?;
            }
            Ok(())
        })
        .collect();
    let mut failed = 0;
    for (rel, r) in files.iter().zip(&results) {
        if let Err(e) = r {
            failed += 1;
            log::warn!("skipped {rel}: {e}");
            eprintln!("skip: {rel}: {}", e.to_string().replace('\n', " "));
        }
    }
    log::info!(
        "enhanced {} of {} images",
        files.len() - failed,
        files.len()
    );
    if failed == files.len() {
        return Err(Error::Dataset(format!(
            "all {failed} images under {} failed",
            input.display()
        )));
    }
    Ok(())
}

/// Fuses every pair with the same relative path. Any unmatched file aborts
/// the command before anything is written.
pub fn fuse(cfg: &ExperimentConfig, pix1: &Path, pix2: &Path, output: &Path) -> Result<()> {
    let a: BTreeSet<String> = list_images(pix1)?.into_iter().collect();
    let b: BTreeSet<String> = list_images(pix2)?.into_iter().collect();
    let unmatched: Vec<&String> = a.symmetric_difference(&b).collect();
    if !unmatched.is_empty() {
        let names: Vec<&str> = unmatched.iter().map(|s| s.as_str()).collect();
        return Err(Error::Dataset(format!(
            "unmatched files: {}",
            names.join(", ")
        )));
    }
    if a.is_empty() {
        return Err(Error::Dataset(format!(
            "no images under {}",
            pix1.display()
        )));
    }
    let files: Vec<&String> = a.iter().collect();
    files
        .par_iter()
        .map(|rel| {
            let x = load_image(&pix1.join(rel))?;
            let y = load_image(&pix2.join(rel))?;
            let fused = fuse_standardized(&x, &y, cfg.imaging.levels, cfg.imaging.size)?;
            save_png(&fused, &output.join(png_name(rel)))
        })
        .collect::<Result<Vec<()>>>()?;
    log::info!("fused {} pairs", files.len());
    Ok(())
}

pub fn split(cfg: &ExperimentConfig, root: &Path, output: &Path) -> Result<()> {
    let mut manifest = split_tree(root, &cfg.data.ratios, cfg.seed)?;
    if cfg.data.balance {
        manifest = balance(&manifest, SplitName::Train, cfg.seed)?;
        manifest = balance(&manifest, SplitName::Valid, cfg.seed)?;
    }
    manifest.save(output)?;
    for name in SplitName::ALL {
        println!("{}: {:?}", name.name(), manifest.class_counts(name));
    }
    Ok(())
}
