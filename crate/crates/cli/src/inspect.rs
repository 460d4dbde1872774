use std::io::Write;

use orthnewton::cost::{make_neg_kurtosis_squared, Contrast};
use orthnewton::ica::{make_mixing, synthetic_sources, SourceKind};
use orthnewton::newton::{assemble, nonzero_positions, sparsity_report};

use crate::args::InspectArgs;
use crate::manifest::{write_json, RunManifest};
use crate::Failure;

pub fn run(args: InspectArgs) -> Result<(), Failure> {
    let n = args.n;
    if n < 2 {
        return Err(Failure::Input("--n must be at least 2".into()));
    }
    // Mixed non-Gaussian samples give generic, fully populated statistics.
    let kinds: Vec<SourceKind> = (0..n)
        .map(|i| [SourceKind::Uniform, SourceKind::Laplace, SourceKind::TwoPoint][i % 3])
        .collect();
    let sources = synthetic_sources(&kinds, (8 * n).max(64), args.seed)?;
    let y = sources.left_mul(&make_mixing(n, args.seed)?.a)?;
    let eval = make_neg_kurtosis_squared().evaluate(&y)?;
    let system = assemble(&eval, 0.0)?;
    let report = sparsity_report(&system);
    println!("{}", serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?);

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let report_path = dir.join("sparsity.json");
        write_json(&report_path, &report)?;
        let coords_path = dir.join("nonzeros.csv");
        let mut w = std::io::BufWriter::new(std::fs::File::create(&coords_path)?);
        writeln!(w, "row,col")?;
        for (r, c) in nonzero_positions(&system) {
            writeln!(w, "{r},{c}")?;
        }
        w.flush()?;
        let mut manifest = RunManifest::new("inspect");
        manifest.seeds.push(args.seed);
        manifest.outputs = vec![report_path, coords_path];
        manifest.write(&dir.join("manifest.json"))?;
    }
    Ok(())
}
