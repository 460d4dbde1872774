use std::fs::File;
use std::io::BufWriter;

use orthnewton::ica::{make_mixing, SourceKind, SyntheticProblem};
use orthnewton::io::{default_names, encode_wav_mono16, read_wav_channels, wav_sample_rate, write_csv_samples, MatrixFile};

use crate::args::MixArgs;
use crate::manifest::RunManifest;
use crate::Failure;

/// Largest magnitude written to a 16-bit file after rescaling.
const WAV_PEAK: f64 = 0.99;

pub fn run(args: MixArgs) -> Result<(), Failure> {
    if args.sources.is_empty() {
        synthetic(&args)
    } else {
        from_wav(&args)
    }
}

fn synthetic(args: &MixArgs) -> Result<(), Failure> {
    let kinds = args
        .synthetic
        .iter()
        .map(|s| SourceKind::parse(s))
        .collect::<orthnewton::Result<Vec<_>>>()?;
    let problem = SyntheticProblem::generate(&kinds, args.samples, args.seed)?;
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv_samples(BufWriter::new(File::create(&args.out)?), &default_names(kinds.len()), &problem.mixed)?;
    let matrix_path = args.out.with_extension("mixing.json");
    std::fs::write(&matrix_path, MatrixFile::from_matrix(&problem.mixing.a, Some(args.seed)).to_json())?;

    let mut manifest = RunManifest::new("mix");
    manifest.seeds.push(args.seed);
    manifest.outputs = vec![args.out.clone(), matrix_path.clone()];
    manifest.write(&args.out.with_extension("manifest.json"))?;
    println!("wrote {} and {}", args.out.display(), matrix_path.display());
    Ok(())
}

fn from_wav(args: &MixArgs) -> Result<(), Failure> {
    let sources = read_wav_channels(&args.sources)?;
    let rate = wav_sample_rate(&std::fs::read(&args.sources[0])?)?;
    let mixing = make_mixing(sources.n(), args.seed)?;
    let mixed = sources.left_mul(&mixing.a)?;
    // A common positive gain keeps the mixture inside the 16-bit range
    // without changing what any separation can recover.
    let peak = mixed.matrix().abs().max();
    let gain = if peak > WAV_PEAK { WAV_PEAK / peak } else { 1.0 };

    std::fs::create_dir_all(&args.out)?;
    let mut outputs = Vec::new();
    for i in 0..mixed.n() {
        let channel: Vec<f64> = mixed.channel(i).iter().map(|v| v * gain).collect();
        let path = args.out.join(format!("mixed{i}.wav"));
        std::fs::write(&path, encode_wav_mono16(&channel, rate)?)?;
        outputs.push(path);
    }
    let matrix_path = args.out.join("mixing.json");
    std::fs::write(&matrix_path, MatrixFile::from_matrix(&mixing.a, Some(args.seed)).to_json())?;
    outputs.push(matrix_path);

    let mut manifest = RunManifest::new("mix");
    manifest.inputs = args.sources.clone();
    manifest.seeds.push(args.seed);
    manifest.outputs = outputs;
    manifest.write(&args.out.join("manifest.json"))?;
    println!("wrote {} mixed channels to {} (gain {gain:.6})", mixed.n(), args.out.display());
    Ok(())
}
