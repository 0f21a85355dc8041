use std::path::{Path, PathBuf};

use rowcrop::analysis::{observation_report, read_observations};
use rowcrop::prescription::{export_prescription, import_prescription, prescription_stats};
use rowcrop::raster::{load_mask, load_raster, range_sidecar_path, save_field, save_mask, save_raster, world_file_path};
use rowcrop::rowdetect::{evaluate_detection, read_row_lines, split_at_tile_columns, write_row_lines, DetectionEvaluation};
use rowcrop::sprayersim::{application_accuracy, export_as_applied, import_as_applied};
use rowcrop::synthfield::{generate, truth_to_files};
use rowcrop::weedmap::write_regions;

use crate::args::*;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::overlay::{render_overlay, Layers};
use crate::stages;

/// Tracks what a command wrote so a failure can remove it again.
pub struct Session {
    pub manifest: RunManifest,
    written: Vec<PathBuf>,
}

impl Session {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Session {
            manifest: RunManifest::new(command, cfg),
            written: Vec::new(),
        }
    }

    fn input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        self.manifest.add_input(role, path)
    }

    /// Runs `write`, then digests each `(role, path)` it produced.
    fn produce(&mut self, outputs: &[(&str, PathBuf)], write: impl FnOnce() -> CliResult<()>) -> CliResult<()> {
        self.written.extend(outputs.iter().map(|(_, p)| p.clone()));
        write()?;
        for (role, path) in outputs {
            self.manifest.add_output(role, path)?;
        }
        Ok(())
    }

    fn image_outputs(role: &str, path: &Path) -> Vec<(String, PathBuf)> {
        vec![(role.to_string(), path.to_path_buf()), (format!("{role}_world_file"), world_file_path(path))]
    }

    fn produce_image(&mut self, role: &str, path: &Path, write: impl FnOnce() -> CliResult<()>) -> CliResult<()> {
        let owned = Self::image_outputs(role, path);
        let outs: Vec<(&str, PathBuf)> = owned.iter().map(|(r, p)| (r.as_str(), p.clone())).collect();
        self.produce(&outs, write)
    }

    fn report(&mut self, opts: &OutputOpts, text: &str) -> CliResult<()> {
        match &opts.report {
            Some(path) => self.produce(&[("report", path.clone())], || {
                std::fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
            }),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn finish(&mut self, path: Option<PathBuf>) -> CliResult<()> {
        if let Some(path) = path {
            self.written.push(path.clone());
            self.manifest.write(&path)?;
        }
        Ok(())
    }

    /// Removes every file this session wrote or started writing.
    pub fn cleanup(&self) {
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
    }
}

fn manifest_next_to(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn manifest_path(opts: &OutputOpts, primary: Option<&Path>) -> Option<PathBuf> {
    opts.manifest
        .clone()
        .or_else(|| primary.map(manifest_next_to))
        .or_else(|| opts.report.as_deref().map(manifest_next_to))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))
}

pub fn segment(cmd: &SegmentCmd, cfg: &RunConfig, s: &mut Session) -> CliResult<()> {
    s.input("raster", &cmd.input)?;
    let raster = load_raster(&cmd.input)?;
    let seg = s.manifest.time("segment", || stages::segment(cfg, &raster))?;
    s.produce_image("mask", &cmd.output, || Ok(save_mask(&seg.mask, &cmd.output)?))?;
    if let Some(path) = &cmd.exgi {
        let mut outs = Session::image_outputs("exgi", path);
        outs.push(("exgi_range".into(), range_sidecar_path(path)));
        let outs: Vec<(&str, PathBuf)> = outs.iter().map(|(r, p)| (r.as_str(), p.clone())).collect();
        s.produce(&outs, || Ok(save_field(&seg.exgi, path)?))?;
    }
    s.report(&cmd.out, &seg.report)?;
    s.finish(manifest_path(&cmd.out, Some(&cmd.output)))
}

pub fn detect_rows(cmd: &DetectRowsCmd, cfg: &RunConfig, s: &mut Session) -> CliResult<()> {
    s.input("mask", &cmd.mask)?;
    let mask = load_mask(&cmd.mask)?;
    let (lines, report) = s.manifest.time("detect-rows", || stages::detect(cfg, &mask))?;
    s.produce(&[("rows", cmd.output.clone())], || Ok(write_row_lines(&cmd.output, &lines)?))?;
    s.report(&cmd.out, &report)?;
    s.finish(manifest_path(&cmd.out, Some(&cmd.output)))
}

pub fn weed_map(cmd: &WeedMapCmd, cfg: &RunConfig, s: &mut Session) -> CliResult<()> {
    s.input("mask", &cmd.mask)?;
    s.input("rows", &cmd.rows)?;
    let veg = load_mask(&cmd.mask)?;
    let lines = read_row_lines(&cmd.rows)?;
    let wm = s.manifest.time("weed-map", || stages::weed_map(cfg, &veg, &lines))?;
    s.produce_image("weeds", &cmd.output, || Ok(save_mask(&wm.weeds, &cmd.output)?))?;
    if let Some(path) = &cmd.regions {
        s.produce(&[("regions", path.clone())], || Ok(write_regions(path, &wm.regions)?))?;
    }
    if let Some(path) = &cmd.crop_zone {
        s.produce_image("crop_zone", path, || Ok(save_mask(&wm.crop_zone, path)?))?;
    }
    s.report(&cmd.out, &wm.report)?;
    s.finish(manifest_path(&cmd.out, Some(&cmd.output)))
}

pub fn prescribe(cmd: &PrescribeCmd, cfg: &RunConfig, s: &mut Session) -> CliResult<()> {
    s.input("weeds", &cmd.weeds)?;
    let weeds = load_mask(&cmd.weeds)?;
    let (map, report) = s.manifest.time("prescribe", || stages::prescribe(cfg, &weeds))?;
    s.produce(&[("prescription", cmd.output.clone())], || Ok(export_prescription(&map, &cmd.output)?))?;
    s.report(&cmd.out, &report)?;
    s.finish(manifest_path(&cmd.out, Some(&cmd.output)))
}

pub fn simulate_spray(cmd: &SimulateSprayCmd, cfg: &RunConfig, s: &mut Session) -> CliResult<()> {
    s.input("prescription", &cmd.prescription)?;
    let map = import_prescription(&cmd.prescription)?;
    let (applied, report) = s.manifest.time("simulate-spray", || stages::spray(cfg, &map))?;
    s.produce(&[("as_applied", cmd.output.clone())], || Ok(export_as_applied(&applied, &cmd.output)?))?;
    s.report(&cmd.out, &report)?;
    s.finish(manifest_path(&cmd.out, Some(&cmd.output)))
}

/// Reads `tp`, `fp`, `fn` and optional `tn` from `key=value` (or `key: value`) lines.
pub fn parse_counts(text: &str) -> Result<DetectionEvaluation, String> {
    let mut counts: [Option<u64>; 4] = [None; 4];
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| format!("line {}: expected key=value", n + 1))?;
        let slot = match k.trim().to_ascii_lowercase().as_str() {
            "tp" => 0,
            "fp" => 1,
            "fn" => 2,
            "tn" => 3,
            other => return Err(format!("line {}: unknown key {other:?}", n + 1)),
        };
        let value = v
            .trim()
            .parse()
            .map_err(|e| format!("line {}: bad count {:?}: {e}", n + 1, v.trim()))?;
        if counts[slot].replace(value).is_some() {
            return Err(format!("line {}: duplicate key {}", n + 1, k.trim()));
        }
    }
    match counts {
        [Some(tp), Some(fp), Some(fn_), tn] => Ok(DetectionEvaluation::from_counts(tp, fp, fn_, tn.unwrap_or(0))),
        _ => Err("counts need tp, fp and fn".into()),
    }
}

pub fn evaluate_rows(cmd: &EvaluateRowsCmd, cfg: &RunConfig, s: &mut Session) -> CliResult<()> {
    let eval = if let Some(path) = &cmd.counts {
        s.input("counts", path)?;
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        parse_counts(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
    } else {
        let (det_path, truth_path) = match (&cmd.detected, &cmd.truth) {
            (Some(d), Some(t)) => (d, t),
            _ => return Err(CliError::config("evaluate-rows needs --detected with --truth, or --counts")),
        };
        s.input("detected", det_path)?;
        s.input("truth", truth_path)?;
        let detected = read_row_lines(det_path)?;
        let mut truth = read_row_lines(truth_path)?;
        if let Some(mask_path) = &cmd.mask {
            s.input("mask", mask_path)?;
            let mask = load_mask(mask_path)?;
            truth = split_at_tile_columns(&truth, mask.width(), &mask.geo(), &cfg.detect.tile);
        }
        let tol = cmd.match_tolerance_m.unwrap_or_else(|| cfg.match_tolerance_m());
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(CliError::config(format!("match tolerance must be non-negative, got {tol}")));
        }
        evaluate_detection(&detected, &truth, tol)
    };
    s.report(&cmd.out, &eval.to_report())?;
    s.finish(manifest_path(&cmd.out, None))
}

pub fn stats(cmd: &StatsCmd, cfg: &RunConfig, s: &mut Session) -> CliResult<()> {
    let report = if let Some(path) = &cmd.observations {
        s.input("observations", path)?;
        let obs = read_observations(path)?;
        let alpha = cmd.alpha.unwrap_or(cfg.alpha);
        observation_report(&obs, alpha)?
    } else if let Some(path) = &cmd.prescription {
        s.input("prescription", path)?;
        let map = import_prescription(path)?;
        let mut text = prescription_stats(&map)?.to_report();
        if let Some(applied_path) = &cmd.as_applied {
            s.input("as_applied", applied_path)?;
            let applied = import_as_applied(applied_path)?;
            text.push_str(&application_accuracy(&applied, &map)?.to_report());
        }
        text
    } else {
        return Err(CliError::config("stats needs --observations or --prescription"));
    };
    s.report(&cmd.out, &report)?;
    s.finish(manifest_path(&cmd.out, None))
}

pub fn synth(cmd: &SynthCmd, cfg: &RunConfig, s: &mut Session) -> CliResult<()> {
    ensure_dir(&cmd.output_dir)?;
    let (raster, truth) = s.manifest.time("synth", || generate(&cfg.synth))?;
    let field = cmd.output_dir.join("field.png");
    s.produce_image("raster", &field, || Ok(save_raster(&raster, &field)?))?;
    let rows = cmd.output_dir.join("truth_rows.csv");
    let weeds = cmd.output_dir.join("truth_weeds.csv");
    s.produce(&[("truth_rows", rows.clone()), ("truth_weeds", weeds.clone())], || {
        Ok(truth_to_files(&truth, &rows, &weeds)?)
    })?;
    let report = format!(
        "seed={}\nwidth_px={}\nheight_px={}\nrows={}\nplants={}\nweeds={}\n",
        cfg.synth.seed,
        raster.width,
        raster.height,
        truth.rows.len(),
        truth.plants.len(),
        truth.weeds.len()
    );
    s.report(&cmd.out, &report)?;
    s.finish(Some(cmd.out.manifest.clone().unwrap_or_else(|| cmd.output_dir.join("manifest.json"))))
}

pub fn pipeline(cmd: &PipelineCmd, cfg: &RunConfig, s: &mut Session) -> CliResult<()> {
    ensure_dir(&cmd.output_dir)?;
    let dir = &cmd.output_dir;
    let write_text = |path: &Path, text: &str| -> CliResult<()> {
        std::fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
    };
    s.input("raster", &cmd.input)?;
    let raster = load_raster(&cmd.input)?;
    let mut combined = String::new();

    let seg = s.manifest.time("segment", || stages::segment(cfg, &raster))?;
    let mask_path = dir.join("mask.png");
    s.produce_image("mask", &mask_path, || Ok(save_mask(&seg.mask, &mask_path)?))?;
    combined.push_str(&stages::namespaced("segment", &seg.report));

    let (lines, report) = s.manifest.time("detect-rows", || stages::detect(cfg, &seg.mask))?;
    let rows_path = dir.join("rows.csv");
    s.produce(&[("rows", rows_path.clone())], || Ok(write_row_lines(&rows_path, &lines)?))?;
    combined.push_str(&stages::namespaced("detect-rows", &report));

    let wm = s.manifest.time("weed-map", || stages::weed_map(cfg, &seg.mask, &lines))?;
    let weeds_path = dir.join("weeds.png");
    s.produce_image("weeds", &weeds_path, || Ok(save_mask(&wm.weeds, &weeds_path)?))?;
    let regions_path = dir.join("regions.csv");
    s.produce(&[("regions", regions_path.clone())], || Ok(write_regions(&regions_path, &wm.regions)?))?;
    combined.push_str(&stages::namespaced("weed-map", &wm.report));

    let (map, report) = s.manifest.time("prescribe", || stages::prescribe(cfg, &wm.weeds))?;
    let rx_path = dir.join("prescription.geojson");
    s.produce(&[("prescription", rx_path.clone())], || Ok(export_prescription(&map, &rx_path)?))?;
    let rx_report = dir.join("prescription_report.txt");
    s.produce(&[("prescription_report", rx_report.clone())], || write_text(&rx_report, &report))?;
    combined.push_str(&stages::namespaced("prescribe", &report));

    if cmd.simulate {
        let (applied, report) = s.manifest.time("simulate-spray", || stages::spray(cfg, &map))?;
        let applied_path = dir.join("as_applied.geojson");
        s.produce(&[("as_applied", applied_path.clone())], || Ok(export_as_applied(&applied, &applied_path)?))?;
        let spray_report = dir.join("spray_report.txt");
        s.produce(&[("spray_report", spray_report.clone())], || write_text(&spray_report, &report))?;
        combined.push_str(&stages::namespaced("simulate-spray", &report));
    }

    let report_path = dir.join("report.txt");
    s.produce(&[("pipeline_report", report_path.clone())], || write_text(&report_path, &combined))?;
    if let Some(extra) = &cmd.out.report {
        s.produce(&[("report", extra.clone())], || write_text(extra, &combined))?;
    }
    s.finish(Some(cmd.out.manifest.clone().unwrap_or_else(|| dir.join("manifest.json"))))
}

pub fn overlay(cmd: &OverlayCmd, _cfg: &RunConfig, s: &mut Session) -> CliResult<()> {
    s.input("raster", &cmd.raster)?;
    let raster = load_raster(&cmd.raster)?;
    let lines = match &cmd.rows {
        Some(p) => {
            s.input("rows", p)?;
            Some(read_row_lines(p)?)
        }
        None => None,
    };
    let weeds = match &cmd.weeds {
        Some(p) => {
            s.input("weeds", p)?;
            Some(load_mask(p)?)
        }
        None => None,
    };
    let map = match &cmd.prescription {
        Some(p) => {
            s.input("prescription", p)?;
            Some(import_prescription(p)?)
        }
        None => None,
    };
    let layers = Layers {
        lines: lines.as_deref(),
        weeds: weeds.as_ref(),
        prescription: map.as_ref(),
    };
    let out = s.manifest.time("overlay", || render_overlay(&raster, &layers))?;
    s.produce_image("overlay", &cmd.output, || Ok(save_raster(&out, &cmd.output)?))?;
    s.finish(manifest_path(&cmd.out, Some(&cmd.output)))
}
