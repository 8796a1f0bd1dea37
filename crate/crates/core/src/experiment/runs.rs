//! Training runs, accuracy matrices, the band-mode comparison and spectra.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::dataset::{generate_scenario_dataset, load_population, load_scenario_frames, write_population};
use super::manifest::Manifest;
use super::{Axis, ExperimentPlan, MatrixPlan};
use crate::capture::{measure_oob_power, BandMode, Representation, Spectrum};
use crate::channel::config_spreading_factor;
use crate::cnn::{
    evaluate, save_checkpoint, split_frames, train, write_history_csv, Checkpoint, Cnn, EpochRecord, Evaluation,
};
use crate::error::{Error, Result};
use crate::impairments::{apply_device, DeviceProfile, PopulationFile};
use crate::lora::{synthesize_transmission, LoRaConfig, SymbolStream};
use crate::seed;

/// Identity of one trained model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RunKey {
    pub scenario: String,
    pub representation: Representation,
    pub band_mode: BandMode,
    pub rep: u32,
}

impl RunKey {
    pub fn stem(&self) -> String {
        format!("{}_{}_{}_r{}", self.scenario, self.representation, self.band_mode, self.rep)
    }
}

#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub key: RunKey,
    pub model: Cnn<f32>,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub train_seconds: f64,
    /// Held-out test split of the training scenario.
    pub test: Evaluation,
    /// `(train, validation, test)` frame counts.
    pub split_sizes: (usize, usize, usize),
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixCell {
    pub accuracy: f64,
    pub frames: u64,
}

impl MatrixCell {
    fn of(e: &Evaluation) -> Self {
        Self {
            accuracy: e.accuracy,
            frames: e.frames(),
        }
    }
}

/// Rows are train scenarios, columns test scenarios.
///
/// Diagonal cells use the held-out test split of the scenario; off-diagonal
/// cells use every frame of the test scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyMatrix {
    pub axis: Axis,
    pub representation: Representation,
    pub band_mode: BandMode,
    pub rep: u32,
    pub scenarios: Vec<String>,
    pub cells: Vec<Vec<MatrixCell>>,
}

impl AccuracyMatrix {
    pub fn diagonal_mean(&self) -> f64 {
        let n = self.scenarios.len();
        (0..n).map(|i| self.cells[i][i].accuracy).sum::<f64>() / n as f64
    }

    /// Mean over off-diagonal cells, `None` for a single scenario.
    pub fn off_diagonal_mean(&self) -> Option<f64> {
        let n = self.scenarios.len();
        if n < 2 {
            return None;
        }
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += self.cells[i][j].accuracy;
                }
            }
        }
        Some(s / (n * (n - 1)) as f64)
    }

    pub fn cell(&self, train: &str, test: &str) -> Option<MatrixCell> {
        let i = self.scenarios.iter().position(|s| s == train)?;
        let j = self.scenarios.iter().position(|s| s == test)?;
        Some(self.cells[i][j])
    }

    pub fn stem(&self) -> String {
        format!("matrix_{}_{}_{}_r{}", self.axis.as_str(), self.representation, self.band_mode, self.rep)
    }

    /// `train\test,<test scenarios...>` with one row per train scenario.
    pub fn to_wide_csv(&self) -> String {
        let mut s = String::from("train\\test");
        for id in &self.scenarios {
            s.push(',');
            s.push_str(id);
        }
        s.push('\n');
        for (id, row) in self.scenarios.iter().zip(&self.cells) {
            s.push_str(id);
            for c in row {
                let _ = write!(s, ",{}", c.accuracy);
            }
            s.push('\n');
        }
        s
    }

    /// Header of [`Self::long_rows`].
    pub const LONG_HEADER: &'static str = "axis,representation,band_mode,rep,train,test,accuracy,frames\n";

    pub fn long_rows(&self) -> String {
        let mut s = String::new();
        for (i, tr) in self.scenarios.iter().enumerate() {
            for (j, te) in self.scenarios.iter().enumerate() {
                let c = self.cells[i][j];
                let _ = writeln!(
                    s,
                    "{},{},{},{},{tr},{te},{},{}",
                    self.axis.as_str(),
                    self.representation,
                    self.band_mode,
                    self.rep,
                    c.accuracy,
                    c.frames
                );
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OobRow {
    pub representation: Representation,
    pub band_mode: BandMode,
    pub rep: u32,
    pub accuracy: f64,
    pub test_frames: u64,
    pub parameters: usize,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OobReport {
    pub scenario: String,
    pub rows: Vec<OobRow>,
}

impl OobReport {
    /// Mean test accuracy over repetitions.
    pub fn mean_accuracy(&self, representation: Representation, band_mode: BandMode) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.representation == representation && r.band_mode == band_mode)
            .map(|r| r.accuracy)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Total training time of in-band-only runs over in-band-plus-OOB runs.
    pub fn time_ratio(&self, representation: Representation) -> Option<f64> {
        let total = |b: BandMode| -> f64 {
            self.rows
                .iter()
                .filter(|r| r.representation == representation && r.band_mode == b)
                .map(|r| r.train_seconds)
                .sum()
        };
        let (a, b) = (total(BandMode::InBandOnly), total(BandMode::InBandPlusOob));
        (a > 0.0 && b > 0.0).then(|| a / b)
    }

    /// Accuracy table; timings are kept out so the file is reproducible.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scenario,representation,band_mode,rep,accuracy,test_frames,parameters\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                self.scenario, r.representation, r.band_mode, r.rep, r.accuracy, r.test_frames, r.parameters
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumExport {
    pub name: String,
    pub path: PathBuf,
    pub spectrum: Spectrum,
    pub oob_ratio_db: f64,
}

/// A plan bound to its population, with trained models kept for reuse.
pub struct Experiment {
    pub plan: ExperimentPlan,
    pub population: PopulationFile,
    runs: BTreeMap<RunKey, TrainedRun>,
    manifest: Manifest,
    command: String,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl Experiment {
    /// Write the population and every scenario dataset.
    pub fn generate(plan: ExperimentPlan) -> Result<Self> {
        let population = write_population(&plan)?;
        let mut ex = Self::with_population(plan, population, "generate");
        let p = ex.plan.population_path();
        ex.manifest.record(&ex.plan, &p, "generate")?;
        for spec in ex.plan.scenario_specs() {
            for base in generate_scenario_dataset(&ex.plan, &ex.population, &spec)? {
                let (data, meta) = crate::sigmf::pair_paths(&base);
                ex.manifest.record(&ex.plan, &data, "generate")?;
                ex.manifest.record(&ex.plan, &meta, "generate")?;
            }
        }
        Ok(ex)
    }

    /// Bind to the population a previous `generate` wrote.
    pub fn open(plan: ExperimentPlan, command: &str) -> Result<Self> {
        let population = load_population(&plan)?;
        Ok(Self::with_population(plan, population, command))
    }

    fn with_population(plan: ExperimentPlan, population: PopulationFile, command: &str) -> Self {
        let manifest = Manifest::open(&plan);
        Self {
            plan,
            population,
            runs: BTreeMap::new(),
            manifest,
            command: command.to_string(),
        }
    }

    fn emit(&mut self, path: &Path, text: &str) -> Result<()> {
        write_text(path, text)?;
        self.manifest.record(&self.plan, path, &self.command)
    }

    pub fn write_manifest(&mut self) -> Result<PathBuf> {
        self.manifest.write(&self.plan)
    }

    /// Train (or reuse) the model for one scenario, representation, band
    /// mode and repetition, and save its checkpoint and history.
    pub fn trained(
        &mut self,
        scenario: &str,
        representation: Representation,
        band_mode: BandMode,
        rep: u32,
    ) -> Result<&TrainedRun> {
        let key = RunKey {
            scenario: scenario.to_string(),
            representation,
            band_mode,
            rep,
        };
        if !self.runs.contains_key(&key) {
            let run = self.train_run(key.clone())?;
            self.runs.insert(key.clone(), run);
        }
        Ok(&self.runs[&key])
    }

    fn train_run(&mut self, key: RunKey) -> Result<TrainedRun> {
        let plan = &self.plan;
        plan.scenario(&key.scenario)?;
        let frames = load_scenario_frames(plan, &key.scenario, key.representation, key.band_mode)?;
        let mut split = plan.split.clone();
        split.rng_seed = seed::derive(split.rng_seed, key.rep as u64);
        let data = split_frames(frames, &split)?;
        let mut schedule = plan.schedule.clone();
        schedule.rng_seed = seed::derive(schedule.rng_seed, key.rep as u64);
        let init_seed = seed::derive_str(seed::derive(plan.seed, key.rep as u64), "init");
        let model = Cnn::<f32>::new(plan.architecture(), init_seed)?;
        log::info!(
            "training {}: {} train / {} val / {} test frames",
            key.stem(),
            data.train.len(),
            data.validation.len(),
            data.test.len()
        );
        let trained = train(model, &data, &schedule)?;
        let test = evaluate(&trained.model, &data.test)?;
        log::info!("{}: test accuracy {:.4} (best epoch {})", key.stem(), test.accuracy, trained.best_epoch);

        let dir = plan.models_dir();
        let ckpt = dir.join(format!("{}.ckpt", key.stem()));
        save_checkpoint(
            &Checkpoint {
                model: trained.model.clone(),
                schedule,
                best_epoch: trained.best_epoch,
            },
            &ckpt,
        )?;
        let hist = dir.join(format!("{}_history.csv", key.stem()));
        write_history_csv(&trained.history, &hist)?;
        self.manifest.record(&self.plan, &ckpt, &self.command)?;
        self.manifest.record(&self.plan, &hist, &self.command)?;
        Ok(TrainedRun {
            key,
            model: trained.model,
            best_epoch: trained.best_epoch,
            history: trained.history,
            train_seconds: trained.train_seconds,
            test,
            split_sizes: (data.train.len(), data.validation.len(), data.test.len()),
            checkpoint: ckpt,
        })
    }

    /// Train one model per scenario of the matrix and test it everywhere.
    pub fn run_matrix(&mut self, matrix: &MatrixPlan, representation: Representation, rep: u32) -> Result<AccuracyMatrix> {
        let band_mode = self.plan.capture.band_mode;
        for id in &matrix.scenarios {
            self.plan.scenario(id)?;
            if !self.plan.dataset_dir(id).is_dir() {
                return Err(Error::MissingDataset(id.clone()));
            }
        }
        let n = matrix.scenarios.len();
        let mut cells = vec![vec![MatrixCell { accuracy: 0.0, frames: 0 }; n]; n];
        for (i, id) in matrix.scenarios.iter().enumerate() {
            cells[i][i] = MatrixCell::of(&self.trained(id, representation, band_mode, rep)?.test);
        }
        // Each foreign scenario is loaded once and shown to every other model.
        for (j, test_id) in matrix.scenarios.iter().enumerate() {
            if n < 2 {
                break;
            }
            let frames = load_scenario_frames(&self.plan, test_id, representation, band_mode)?;
            for (i, train_id) in matrix.scenarios.iter().enumerate() {
                if i == j {
                    continue;
                }
                let key = RunKey {
                    scenario: train_id.clone(),
                    representation,
                    band_mode,
                    rep,
                };
                cells[i][j] = MatrixCell::of(&evaluate(&self.runs[&key].model, &frames)?);
            }
        }
        Ok(AccuracyMatrix {
            axis: matrix.axis,
            representation,
            band_mode,
            rep,
            scenarios: matrix.scenarios.clone(),
            cells,
        })
    }

    /// Every matrix of the plan, for each of its representations and every
    /// repetition; writes one wide CSV per matrix and a combined long CSV.
    pub fn cross_eval(&mut self, axis: Option<Axis>) -> Result<Vec<AccuracyMatrix>> {
        let matrices: Vec<MatrixPlan> = self
            .plan
            .matrices
            .iter()
            .filter(|m| axis.is_none_or(|a| m.axis == a))
            .cloned()
            .collect();
        if matrices.is_empty() {
            return Err(Error::InvalidConfig("plan has no matching matrix".into()));
        }
        let results = self.plan.results_dir();
        let mut out = Vec::new();
        let mut long = String::from(AccuracyMatrix::LONG_HEADER);
        for m in &matrices {
            for &r in &m.representations {
                for rep in 0..self.plan.repetitions {
                    let am = self.run_matrix(m, r, rep)?;
                    self.emit(&results.join(format!("{}.csv", am.stem())), &am.to_wide_csv())?;
                    long.push_str(&am.long_rows());
                    out.push(am);
                }
            }
        }
        let name = match axis {
            Some(a) => format!("matrices_{}_long.csv", a.as_str()),
            None => "matrices_long.csv".to_string(),
        };
        self.emit(&results.join(name), &long)?;
        Ok(out)
    }

    /// Same-scenario accuracy in both band modes for each representation.
    pub fn oob_comparison(&mut self) -> Result<OobReport> {
        let oob = self
            .plan
            .oob
            .clone()
            .ok_or_else(|| Error::InvalidConfig("plan has no [oob] section".into()))?;
        let mut rows = Vec::new();
        for rep in 0..self.plan.repetitions {
            for &r in &oob.representations {
                for b in BandMode::ALL {
                    let run = self.trained(&oob.scenario, r, b, rep)?;
                    rows.push(OobRow {
                        representation: r,
                        band_mode: b,
                        rep,
                        accuracy: run.test.accuracy,
                        test_frames: run.test.frames(),
                        parameters: run.model.parameter_count(),
                        train_seconds: run.train_seconds,
                    });
                }
            }
        }
        for pair in rows.chunks(2) {
            if pair[0].parameters != pair[1].parameters {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} parameters", pair[0].parameters),
                    got: format!("{} parameters in {} mode", pair[1].parameters, pair[1].band_mode),
                });
            }
        }
        let report = OobReport {
            scenario: oob.scenario,
            rows,
        };
        let results = self.plan.results_dir();
        self.emit(&results.join("oob_comparison.csv"), &report.to_csv())?;
        let mut timing = serde_json::Map::new();
        for &r in &oob.representations {
            timing.insert(format!("{r}_time_ratio"), serde_json::json!(report.time_ratio(r)));
        }
        timing.insert("rows".into(), serde_json::to_value(&report.rows).expect("rows serialise"));
        let text = serde_json::to_string_pretty(&timing).expect("json") + "\n";
        // Wall-clock numbers differ run to run; not hashed into the manifest.
        write_text(&results.join("oob_timing.json"), &text)?;
        Ok(report)
    }

    /// Spectra of ideal transmissions in each configuration and of an SF7
    /// transmitter at each phase-noise magnitude.
    pub fn export_spectra(&mut self) -> Result<Vec<SpectrumExport>> {
        let sp = self.plan.spectra.clone();
        let fs = self.plan.capture.sample_rate_hz;
        let bw = self.plan.capture.signal_bandwidth_hz;
        let dir = self.plan.spectra_dir();
        let mut out = Vec::new();
        let symbols = self.plan.signal.payload_symbols;
        let mut subjects: Vec<(String, LoRaConfig, DeviceProfile)> = Vec::new();
        for &c in &sp.config_ids {
            let sf = config_spreading_factor(c)?;
            subjects.push((format!("config{c}_sf{sf}"), LoRaConfig::with_sf(sf), DeviceProfile::ideal(0)));
        }
        for (k, &m) in sp.phase_noise.iter().enumerate() {
            let mut dev = DeviceProfile::ideal(0);
            dev.phase_noise_magnitude = m;
            dev.rng_seed = seed::derive_str(seed::derive(self.plan.seed, k as u64), "spectra");
            subjects.push((format!("phase_noise_{m:.2}"), LoRaConfig::with_sf(7), dev));
        }
        for (name, cfg, dev) in subjects {
            let payload = SymbolStream::random(cfg.spreading_factor, symbols, seed::derive_str(self.plan.seed, &name));
            let clean = synthesize_transmission(&cfg, &payload, fs, sp.duration_s)?;
            let buf = apply_device(&clean, &dev)?;
            let m = measure_oob_power(&buf, bw)?;
            let path = dir.join(format!("{name}.csv"));
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            m.spectrum.write_csv(&path)?;
            self.manifest.record(&self.plan, &path, &self.command)?;
            out.push(SpectrumExport {
                name,
                path,
                spectrum: m.spectrum,
                oob_ratio_db: m.ratio_db,
            });
        }
        Ok(out)
    }

    pub fn emit_json(&mut self, path: &Path, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Metadata(e.to_string()))? + "\n";
        self.emit(path, &text)
    }
}
