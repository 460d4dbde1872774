use std::fs::File;
use std::io::BufWriter;

use nalgebra::DMatrix;
use orthnewton::ica::{haar_orthogonal, make_mixing, run_ica, CrosstalkReport};
use orthnewton::io::{parse_matrix_file, read_csv_samples, read_wav_channels, write_csv_samples, write_trace};
use orthnewton::OrthogonalMatrix;
use serde::Serialize;

use crate::args::{InitChoice, SeparateArgs};
use crate::manifest::{write_json, RunManifest};
use crate::Failure;

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Serialize)]
struct Report {
    cost: String,
    termination: orthnewton::Termination,
    iterations: usize,
    final_cost: f64,
    final_gradient: f64,
    final_lambda: f64,
    /// Orthogonal factor found by the optimizer.
    c_final: Vec<Vec<f64>>,
    whitening_mean: Vec<f64>,
    whitening_matrix: Vec<Vec<f64>>,
    /// `C_final · whitening`, applied to mean-centered input.
    unmixing: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    crosstalk: Option<CrosstalkReport>,
}

pub fn run(args: SeparateArgs) -> Result<(), Failure> {
    let mut manifest = RunManifest::new("separate");
    let (names, x) = match &args.input {
        Some(path) => {
            manifest.inputs.push(path.clone());
            let table = read_csv_samples(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            (table.names, table.samples)
        }
        None => {
            manifest.inputs.extend(args.wav.iter().cloned());
            let names = args
                .wav
                .iter()
                .map(|p| p.file_stem().map_or_else(|| "channel".into(), |s| s.to_string_lossy().into_owned()))
                .collect::<Vec<_>>();
            (names, read_wav_channels(&args.wav)?)
        }
    };
    let n = x.n();
    let config = args.opt.config();
    config.validate()?;
    let cost = args.opt.cost.build();

    let c0 = match args.init {
        InitChoice::Identity => OrthogonalMatrix::identity(n),
        InitChoice::Random => haar_orthogonal(n, args.opt.seed)?,
    };
    manifest.seeds.push(args.opt.seed);
    let truth = if let Some(seed) = args.mixing_seed {
        manifest.seeds.push(seed);
        Some(make_mixing(n, seed)?.a)
    } else if let Some(path) = &args.mixing_matrix {
        manifest.inputs.push(path.clone());
        let a = parse_matrix_file(&std::fs::read_to_string(path)?)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        if a.nrows() != n {
            return Err(Failure::Input(format!("mixing matrix is {0}x{0}, data has {n} channels", a.nrows())));
        }
        Some(a)
    } else {
        None
    };

    let outcome = run_ica(&x, cost.as_ref(), &config, Some(c0), truth.as_ref())?;
    let run = &outcome.run;

    std::fs::create_dir_all(&args.out)?;
    let unmixed_path = args.out.join("unmixed.csv");
    let unmixed_names: Vec<String> = (0..n).map(|i| format!("unmixed{i}")).collect();
    write_csv_samples(BufWriter::new(File::create(&unmixed_path)?), &unmixed_names, &run.y_final)?;
    let trace_path = args.out.join("trace.jsonl");
    write_trace(BufWriter::new(File::create(&trace_path)?), &run.trace)?;

    let report = Report {
        cost: args.opt.cost.name().into(),
        termination: run.termination,
        iterations: run.iterations(),
        final_cost: run.final_cost(),
        final_gradient: run.final_gradient,
        final_lambda: run.final_lambda,
        c_final: rows(run.c_final.matrix()),
        whitening_mean: outcome.whitening.mean.iter().copied().collect(),
        whitening_matrix: rows(&outcome.whitening.matrix),
        unmixing: rows(&(run.c_final.matrix() * &outcome.whitening.matrix)),
        crosstalk: outcome.crosstalk.clone(),
    };
    let report_path = args.out.join("report.json");
    write_json(&report_path, &report)?;

    manifest.config = Some(config);
    manifest.cost = Some(args.opt.cost.name().into());
    manifest.outputs = vec![unmixed_path, trace_path, report_path];
    manifest.write(&args.out.join("manifest.json"))?;

    println!("channels: {}", names.join(", "));
    println!(
        "termination: {:?} after {} iterations, F = {:.10}, gradient = {:.2e}",
        run.termination,
        run.iterations(),
        run.final_cost(),
        run.final_gradient
    );
    if let Some(ct) = &outcome.crosstalk {
        println!("mean crosstalk: {:.3}%", ct.mean_percent);
        if !ct.is_bijection {
            println!("warning: two outputs are dominated by the same source");
        }
    }
    if run.termination.is_failure() {
        return Err(Failure::Optimizer(format!("{:?}", run.termination)));
    }
    Ok(())
}
