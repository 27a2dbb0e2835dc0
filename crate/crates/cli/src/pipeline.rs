//! The batch pipeline: ground truth, noise, solve, the three detectors, scoring and
//! artifact emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use polyedge::io::{read_image, write_image, write_mask, write_mosaic};
use polyedge::{
    add_gaussian_noise, parameter_map_gradient, score_edges, sobel_magnitude, solve,
    sweep_thresholds, synthesis_gradient, threshold_map, CoefficientField64, EdgeMap, EdgeScore,
    GradMap64, Image64, NoiseSpec, ProblemSpec, SolverConfig, SolverState64, Sweep,
    SynthesisOperator64,
};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// The three detectors compared against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Sobel on the noisy image.
    Sobel,
    /// Sobel on the synthesized image.
    Synthesis,
    /// Pixelwise norm of the parameter maps' Sobel magnitudes.
    ParameterMaps,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Sobel, Method::Synthesis, Method::ParameterMaps];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sobel => "sobel",
            Method::Synthesis => "synth",
            Method::ParameterMaps => "parmap",
        }
    }
}

pub struct Gradients {
    pub truth: GradMap64,
    pub sobel: GradMap64,
    pub synth: GradMap64,
    pub parmap: GradMap64,
}

impl Gradients {
    pub fn of(&self, method: Method) -> &GradMap64 {
        match method {
            Method::Sobel => &self.sobel,
            Method::Synthesis => &self.synth,
            Method::ParameterMaps => &self.parmap,
        }
    }
}

pub struct PipelineOutput {
    pub clean: Image64,
    pub noisy: Image64,
    pub op: SynthesisOperator64,
    pub xhat: CoefficientField64,
    pub state: SolverState64,
    pub denoised: Image64,
    pub gradients: Gradients,
    pub truth: EdgeMap,
    pub solve_time: Duration,
}

impl PipelineOutput {
    pub fn final_feasibility_gap(&self) -> f64 {
        self.state
            .history
            .last()
            .map_or(f64::NAN, |r| r.feasibility_gap)
    }

    pub fn final_objective(&self) -> f64 {
        self.state.history.last().map_or(f64::NAN, |r| r.objective)
    }
}

/// Everything up to (but excluding) thresholding of the three detectors.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutput> {
    let clean: Image64 = read_image(&cfg.input)?;
    let (rows, cols) = clean.dim();

    let truth_grad = sobel_magnitude(&clean)?;
    let truth = threshold_map(&truth_grad, cfg.thresholds.gt)?;

    let noisy = add_gaussian_noise(&clean, &NoiseSpec::new(cfg.sigma, cfg.seed)?);

    let op = SynthesisOperator64::for_image(cfg.degree, rows, cols, cfg.basis)?;
    let spec = ProblemSpec::new(noisy.clone(), op.clone(), cfg.lambda, cfg.delta)?;
    let solver_cfg = SolverConfig::default_for(&op).with_max_iters(cfg.iters);
    let started = Instant::now();
    let (xhat, state) = solve(&spec, &solver_cfg, None)?;
    let solve_time = started.elapsed();

    let denoised = op.apply(&xhat)?;
    let gradients = Gradients {
        truth: truth_grad,
        sobel: sobel_magnitude(&noisy)?,
        synth: synthesis_gradient(&xhat, &op)?,
        parmap: parameter_map_gradient(&xhat)?,
    };
    Ok(PipelineOutput {
        clean,
        noisy,
        op,
        xhat,
        state,
        denoised,
        gradients,
        truth,
        solve_time,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(CliError::io(path))
}

fn gradient_image(g: &GradMap64) -> Image64 {
    g.values().mapv(|v| 255.0 * v)
}

pub const SCORE_HEADER: &str = "method,sigma,delta,threshold,precision,recall,f1,tolerance_px,seed";

fn score_row(out: &mut String, method: &str, cfg: &RunConfig, threshold: f64, s: &EdgeScore) {
    let _ = write!(
        out,
        "{method},{},{},{threshold},{:.6},{:.6},{:.6},{},{}",
        cfg.sigma, cfg.delta, s.precision, s.recall, s.f1, s.tolerance_px, cfg.seed
    );
}

pub struct MethodResult {
    pub method: Method,
    pub threshold: f64,
    pub edges: EdgeMap,
    pub score: EdgeScore,
}

pub struct RunReport {
    pub output: PipelineOutput,
    pub results: Vec<MethodResult>,
    pub written: Vec<PathBuf>,
}

impl RunReport {
    pub fn result(&self, method: Method) -> &MethodResult {
        self.results
            .iter()
            .find(|r| r.method == method)
            .expect("every method is scored")
    }

    pub fn summary(&self) -> String {
        let out = &self.output;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "solver: {} iterations in {:.2?}, objective {:.6e}, feasibility gap {:.3e}",
            out.state.iter,
            out.solve_time,
            out.final_objective(),
            out.final_feasibility_gap()
        );
        let _ = writeln!(
            s,
            "{:<8} {:>9} {:>9} {:>9} {:>9}",
            "method", "threshold", "precision", "recall", "f1"
        );
        for r in &self.results {
            let _ = writeln!(
                s,
                "{:<8} {:>9.3} {:>9.4} {:>9.4} {:>9.4}",
                r.method.name(),
                r.threshold,
                r.score.precision,
                r.score.recall,
                r.score.f1
            );
        }
        s
    }
}

/// Runs the full pipeline at the configured thresholds and writes the requested
/// artifacts into `cfg.out_dir`.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunReport> {
    let output = run_pipeline(cfg)?;
    let t = cfg.thresholds;
    let mut results = Vec::new();
    for method in Method::ALL {
        let threshold = match method {
            Method::Sobel => t.sobel,
            Method::Synthesis => t.synth,
            Method::ParameterMaps => t.parmap,
        };
        let edges = threshold_map(output.gradients.of(method), threshold)?;
        let score = score_edges(&edges, &output.truth, cfg.tolerance_px)?;
        results.push(MethodResult {
            method,
            threshold,
            edges,
            score,
        });
    }

    ensure_dir(&cfg.out_dir)?;
    let dir = &cfg.out_dir;
    let mut written = Vec::new();
    let mut put_image = |name: &str, img: &Image64| -> Result<()> {
        let p = dir.join(name);
        write_image(&p, img)?;
        written.push(p);
        Ok(())
    };
    if cfg.emit.denoised {
        put_image("noisy.pgm", &output.noisy)?;
        put_image("denoised.pgm", &output.denoised)?;
    }
    if cfg.emit.gradmaps {
        put_image("grad_truth.pgm", &gradient_image(&output.gradients.truth))?;
        for m in Method::ALL {
            put_image(
                &format!("grad_{}.pgm", m.name()),
                &gradient_image(output.gradients.of(m)),
            )?;
        }
    }
    if cfg.emit.mosaic {
        let p = dir.join("mosaic.pgm");
        write_mosaic(&p, &output.xhat)?;
        written.push(p);
    }
    if cfg.emit.edges {
        let p = dir.join("edges_truth.pgm");
        write_mask(&p, &output.truth)?;
        written.push(p);
        for r in &results {
            let p = dir.join(format!("edges_{}.pgm", r.method.name()));
            write_mask(&p, &r.edges)?;
            written.push(p);
        }
    }
    if cfg.emit.csv {
        let mut csv = String::from(SCORE_HEADER);
        csv.push('\n');
        for r in &results {
            score_row(&mut csv, r.method.name(), cfg, r.threshold, &r.score);
            csv.push('\n');
        }
        let p = dir.join("scores.csv");
        write_text(&p, &csv)?;
        written.push(p);

        let p = dir.join("history.csv");
        let mut buf = Vec::new();
        output
            .state
            .write_history_csv(&mut buf)
            .map_err(CliError::io(&p))?;
        fs::write(&p, buf).map_err(CliError::io(&p))?;
        written.push(p);
    }
    Ok(RunReport {
        output,
        results,
        written,
    })
}

pub struct SweepReport {
    pub output: PipelineOutput,
    pub sweeps: Vec<(Method, Sweep)>,
    pub csv_path: PathBuf,
}

impl SweepReport {
    pub fn sweep(&self, method: Method) -> &Sweep {
        &self
            .sweeps
            .iter()
            .find(|(m, _)| *m == method)
            .expect("every method is swept")
            .1
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<8} {:>9} {:>9}", "method", "best_t", "best_f1");
        for (m, sw) in &self.sweeps {
            let (t, score) = sw.best_point();
            let _ = writeln!(s, "{:<8} {:>9.3} {:>9.4}", m.name(), t, score.f1);
        }
        s
    }
}

/// Scores every detector over the configured threshold grid and writes `sweep.csv`
/// (score columns plus a `best` flag marking each method's highest-F1 row).
pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepReport> {
    let grid = cfg.sweep_grid.values()?;
    let output = run_pipeline(cfg)?;
    let mut sweeps = Vec::new();
    let mut csv = format!("{SCORE_HEADER},best\n");
    for m in Method::ALL {
        let sw = sweep_thresholds(
            output.gradients.of(m),
            &output.truth,
            &grid,
            cfg.tolerance_px,
        )?;
        for (i, (t, score)) in sw.points.iter().enumerate() {
            score_row(&mut csv, m.name(), cfg, *t, score);
            let _ = writeln!(csv, ",{}", u8::from(i == sw.best));
        }
        sweeps.push((m, sw));
    }
    ensure_dir(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join("sweep.csv");
    write_text(&csv_path, &csv)?;
    Ok(SweepReport {
        output,
        sweeps,
        csv_path,
    })
}
