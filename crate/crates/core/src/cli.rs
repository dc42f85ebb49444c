//! Command-line front end. `main` only forwards `std::env::args` to [`run`].

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::data::{synth_glyphs, LabeledDataset};
use crate::discrimination::{discrimination_report, train, TrainConfig};
use crate::error::{ensure, Error, Result};
use crate::io::{encode_pnm, load_idx, load_mask, load_pnm, read_file};
use crate::manifest::{OutputComparison, RunManifest, MANIFEST_FILE};
use crate::obfuscation::fixtures::{check_all, fixture_root};
use crate::obfuscation::presets::{preset_spec, table3_rows, PresetContext};
use crate::obfuscation::{obfuscate, Method, ObfuscationSpec};
use crate::privacy::{audit_group, parse_profiles, proposition_suite, MonteCarloOptions};
use crate::reversal::{reversal_report, reverse, AttackConfig};
use crate::tensor::Mask;

/// Presets of the default reversal benchmark.
pub const BENCH_PRESETS: &[&str] = &[
    "blur-small",
    "blur-large",
    "pixelize-4x4",
    "pixelize-2x2",
    "pixelize-1x1",
    "crop",
];
pub const DEFAULT_ALPHAS: &[f64] = &[1.5, 2.0, 4.0, 8.0];

#[derive(Debug, Parser)]
#[command(name = "deobfusc", version, about = "Obfuscate images, attack obfuscations and audit their privacy")]
pub struct Cli {
    /// Seed for every random draw; defaults to 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Refuse to run without an explicit --seed.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply an obfuscation to PGM/PPM images.
    Obfuscate(ObfuscateArgs),
    /// Run the reversal attack on one image, or the glyph benchmark.
    Reverse(ReverseArgs),
    /// Audit a profile group and check the propositions.
    Analyze(AnalyzeArgs),
    /// Train and score the discrimination attack.
    Discriminate(DiscriminateArgs),
    /// Re-run a manifest and compare its outputs byte for byte.
    Report(ReportArgs),
    /// Check the golden fixtures.
    GenFixturesCheck(FixtureArgs),
}

#[derive(Debug, Args, Clone)]
pub struct SpecArgs {
    /// Obfuscation spec JSON file.
    #[arg(long, conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    /// Named preset, e.g. blur-small or dppix-4x4.
    #[arg(long)]
    pub preset: Option<String>,
    /// Mask PGM applied with --preset.
    #[arg(long, requires = "preset")]
    pub mask: Option<PathBuf>,
    #[arg(long, requires = "mask")]
    pub mask_blur_radius: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ObfuscateArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReverseArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Attack config JSON; defaults to the bundled settings.
    #[arg(long)]
    pub attack: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Original image, for PSNR and l2 metrics.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Obfuscated image. Omit with --bench.
    pub input: Option<PathBuf>,
    /// Run the synthetic glyph benchmark with a clean readability model.
    #[arg(long, conflicts_with = "input")]
    pub bench: bool,
    /// Comma-separated presets for --bench.
    #[arg(long, value_delimiter = ',')]
    pub presets: Option<Vec<String>>,
    #[command(flatten)]
    pub glyphs: GlyphArgs,
    /// Benchmark images per class.
    #[arg(long, default_value_t = 5)]
    pub per_class: usize,
}

#[derive(Debug, Args, Clone)]
pub struct GlyphArgs {
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    /// Training images per class.
    #[arg(long, default_value_t = 500)]
    pub train_per_class: usize,
    #[arg(long, default_value_t = 2)]
    pub jitter: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Profile group JSON.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Rényi orders; repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    /// Monte Carlo sample count for pairs without a closed form.
    #[arg(long)]
    pub monte_carlo: Option<usize>,
    /// Run the randomized proposition suite on 8x8 images.
    #[arg(long)]
    pub check_props: bool,
    /// Cases per proposition for --check-props.
    #[arg(long, default_value_t = 100)]
    pub cases: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiscriminateArgs {
    /// `synth` or `idx`.
    #[arg(long, default_value = "synth")]
    pub data: String,
    #[command(flatten)]
    pub glyphs: GlyphArgs,
    #[arg(long, default_value_t = 100)]
    pub test_per_class: usize,
    #[arg(long)]
    pub train_images: Option<PathBuf>,
    #[arg(long)]
    pub train_labels: Option<PathBuf>,
    #[arg(long)]
    pub test_images: Option<PathBuf>,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Row table JSON `{"rows": [{"label", "preset" | "spec"}]}`; defaults
    /// to the eight bundled rows plus crop.
    #[arg(long)]
    pub specs: Option<PathBuf>,
    /// Training config JSON.
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Manifest file, or the directory holding it.
    pub manifest: PathBuf,
    /// Where the re-run writes; defaults to `<out>/rerun`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// Fixture root; defaults to $DEOBFUSC_FIXTURES or ./fixtures.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
}

/// What a command printed and, for recorded commands, its manifest.
#[derive(Debug)]
pub struct Outcome {
    pub text: String,
    pub manifest: Option<RunManifest>,
}

/// Parses `argv` (without the program name) and runs the command.
pub fn run(argv: &[String]) -> Result<Outcome> {
    let full: Vec<String> = std::iter::once("deobfusc".to_string()).chain(argv.iter().cloned()).collect();
    let cli = Cli::try_parse_from(&full).map_err(|e| Error::InvalidParam(e.to_string()))?;
    run_cli(cli, argv)
}

pub fn run_cli(cli: Cli, argv: &[String]) -> Result<Outcome> {
    let recorded = !matches!(cli.command, Command::Report(_) | Command::GenFixturesCheck(_));
    ensure!(
        !(cli.strict && recorded && cli.seed.is_none()),
        Error::InvalidParam("--strict requires an explicit --seed".into())
    );
    let seed = cli.seed.unwrap_or(0);
    let started = Instant::now();
    let (text, manifest) = match cli.command {
        Command::Obfuscate(a) => cmd_obfuscate(a, argv, seed)?,
        Command::Reverse(a) => cmd_reverse(a, argv, seed)?,
        Command::Analyze(a) => cmd_analyze(a, argv, seed)?,
        Command::Discriminate(a) => cmd_discriminate(a, argv, seed)?,
        Command::Report(a) => return cmd_report(a),
        Command::GenFixturesCheck(a) => return cmd_fixtures(a),
    };
    let mut manifest = manifest;
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    let path = manifest.save()?;
    Ok(Outcome {
        text: format!("{text}manifest: {}\n", path.display()),
        manifest: Some(manifest),
    })
}

fn make_out_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn to_json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Spec source shared by the commands; presets are resolved per image.
enum SpecSource {
    Fixed(ObfuscationSpec),
    Preset {
        name: String,
        mask: Option<Mask>,
        mask_blur_radius: Option<f64>,
    },
}

impl SpecSource {
    fn load(a: &SpecArgs, m: &mut RunManifest) -> Result<Self> {
        if let Some(path) = &a.spec {
            m.add_input(path)?;
            let text = String::from_utf8(read_file(path)?)
                .map_err(|_| Error::InvalidParam(format!("{} is not UTF-8", path.display())))?;
            let spec = ObfuscationSpec::from_json_str(&text)?;
            if let Some(crate::obfuscation::MaskSource::Path(p)) = &spec.mask {
                let base = path.parent().unwrap_or(Path::new("."));
                m.add_input(&if p.is_relative() { base.join(p) } else { p.clone() })?;
            }
            return Ok(Self::Fixed(spec.resolved(path.parent())?));
        }
        let name = a
            .preset
            .clone()
            .ok_or_else(|| Error::InvalidParam("give --spec or --preset".into()))?;
        let mask = match &a.mask {
            Some(p) => {
                m.add_input(p)?;
                Some(load_mask(p)?)
            }
            None => None,
        };
        Ok(Self::Preset {
            name,
            mask,
            mask_blur_radius: a.mask_blur_radius,
        })
    }

    fn for_shape(&self, width: usize, height: usize, seed: u64) -> Result<ObfuscationSpec> {
        match self {
            Self::Fixed(s) => Ok(s.clone()),
            Self::Preset {
                name,
                mask,
                mask_blur_radius,
            } => preset_spec(
                name,
                &PresetContext {
                    width,
                    height,
                    mask: mask.as_ref(),
                    mask_blur_radius: *mask_blur_radius,
                    seed,
                },
            ),
        }
    }
}

fn with_item_seed(spec: &ObfuscationSpec, i: usize) -> ObfuscationSpec {
    let mut s = spec.clone();
    if let Method::DpPix { seed, .. } = &mut s.method {
        *seed ^= i as u64;
    }
    s
}

fn cmd_obfuscate(a: ObfuscateArgs, argv: &[String], seed: u64) -> Result<(String, RunManifest)> {
    make_out_dir(&a.out)?;
    let mut m = RunManifest::new("obfuscate", argv, Value::Null, Some(seed), &a.out)?;
    let source = SpecSource::load(&a.spec, &mut m)?;
    let mut names = std::collections::BTreeSet::new();
    let mut specs = Vec::new();
    let mut text = String::new();
    for (i, input) in a.inputs.iter().enumerate() {
        m.add_input(input)?;
        let x = load_pnm(input)?;
        let name = input
            .file_name()
            .ok_or_else(|| Error::InvalidParam(format!("not a file: {}", input.display())))?
            .to_string_lossy()
            .into_owned();
        ensure!(
            names.insert(name.clone()),
            Error::InvalidParam(format!("two inputs named {name}"))
        );
        let spec = with_item_seed(&source.for_shape(x.width(), x.height(), seed)?, i);
        let y = obfuscate(&x, &spec)?;
        let path = m.write_output(&name, &encode_pnm(&y))?;
        text += &format!("{} -> {} ({})\n", input.display(), path.display(), spec.method.name());
        specs.push(spec.to_json());
    }
    m.config = json!({ "specs": specs });
    Ok((text, m))
}

fn attack_config(a: &ReverseArgs, m: &mut RunManifest, seed: u64) -> Result<AttackConfig> {
    let mut cfg = match &a.attack {
        Some(p) => {
            m.add_input(p)?;
            AttackConfig::from_json_str(&String::from_utf8_lossy(&read_file(p)?))?
        }
        None => AttackConfig::default(),
    };
    if let Some(n) = a.iterations {
        cfg.iterations = n;
    }
    if let Some(n) = a.restarts {
        cfg.restarts = n;
    }
    cfg.seed = seed;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_reverse(a: ReverseArgs, argv: &[String], seed: u64) -> Result<(String, RunManifest)> {
    make_out_dir(&a.out)?;
    let mut m = RunManifest::new("reverse", argv, Value::Null, Some(seed), &a.out)?;
    let cfg = attack_config(&a, &mut m, seed)?;
    if a.bench {
        return reverse_bench(&a, m, cfg, seed);
    }
    let input = a
        .input
        .as_ref()
        .ok_or_else(|| Error::InvalidParam("give an obfuscated image or --bench".into()))?;
    m.add_input(input)?;
    let y = load_pnm(input)?;
    let spec = SpecSource::load(&a.spec, &mut m)?.for_shape(y.width(), y.height(), seed)?;
    ensure!(
        spec.method.is_deterministic(),
        Error::InvalidParam(format!(
            "{} with noise is randomized; the reversal attack needs a deterministic obfuscation",
            spec.method.name()
        ))
    );
    let mut res = reverse(&y, &spec, &cfg)?;
    if let Some(t) = &a.truth {
        m.add_input(t)?;
        res.compare_to(&load_pnm(t)?)?;
    }
    m.write_output("x_star.pnm", &encode_pnm(res.x_star()))?;
    m.write_output("x_best.pnm", &encode_pnm(res.x_best()))?;
    m.write_output("result.json", &to_json_bytes(&res)?)?;
    m.config = json!({ "spec": spec.to_json(), "attack": cfg });
    let mut text = format!("residual {:.6e}\n", res.final_residual);
    if let (Some(p), Some(l)) = (res.psnr_vs_truth, res.l2_vs_truth) {
        text += &format!("psnr_vs_truth {} dB\nl2_vs_truth {l:.6}\n", crate::json::fmt_real(p, 3));
    }
    Ok((text, m))
}

/// Dataset seeds of the glyph benchmarks: training, test, reversal.
pub fn glyph_seeds(seed: u64) -> (u64, u64, u64) {
    (seed, seed.wrapping_add(1), seed.wrapping_add(2))
}

fn reverse_bench(a: &ReverseArgs, mut m: RunManifest, cfg: AttackConfig, seed: u64) -> Result<(String, RunManifest)> {
    let g = &a.glyphs;
    let (train_seed, _, eval_seed) = glyph_seeds(seed);
    let train_ds = synth_glyphs(g.classes, g.train_per_class, g.jitter, g.noise, train_seed)?;
    let model = train(&train_ds, &TrainConfig { seed, ..TrainConfig::default() })?;
    let eval = synth_glyphs(g.classes, a.per_class, g.jitter, g.noise, eval_seed)?;
    let presets: Vec<String> = a
        .presets
        .clone()
        .unwrap_or_else(|| BENCH_PRESETS.iter().map(|s| s.to_string()).collect());
    let specs = presets
        .iter()
        .map(|p| {
            let ctx = PresetContext {
                width: crate::data::GLYPH_SIZE,
                height: crate::data::GLYPH_SIZE,
                seed,
                ..Default::default()
            };
            Ok((p.clone(), preset_spec(p, &ctx)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = reversal_report(&eval, &specs, &cfg, Some(&model))?;
    let text = report.to_text();
    m.write_output("reversal_report.json", &to_json_bytes(&report)?)?;
    m.write_output("reversal_report.txt", text.as_bytes())?;
    m.config = json!({
        "bench": true,
        "attack": cfg,
        "presets": presets,
        "glyphs": {"classes": g.classes, "train_per_class": g.train_per_class, "per_class": a.per_class,
                   "jitter": g.jitter, "noise": g.noise},
    });
    Ok((text, m))
}

fn cmd_analyze(a: AnalyzeArgs, argv: &[String], seed: u64) -> Result<(String, RunManifest)> {
    make_out_dir(&a.out)?;
    let mut m = RunManifest::new("analyze", argv, Value::Null, Some(seed), &a.out)?;
    ensure!(
        a.profiles.is_some() || a.check_props,
        Error::InvalidParam("give --profiles, --check-props, or both".into())
    );
    let alphas = if a.alpha.is_empty() {
        DEFAULT_ALPHAS.to_vec()
    } else {
        a.alpha.clone()
    };
    ensure!(
        a.epsilon >= 0.0,
        Error::InvalidParam(format!("epsilon must be >= 0, got {}", a.epsilon))
    );
    let mut text = String::new();
    let mut config = json!({ "alphas": alphas, "epsilon": a.epsilon, "monte_carlo": a.monte_carlo });
    if let Some(path) = &a.profiles {
        m.add_input(path)?;
        let v: Value = serde_json::from_slice(&read_file(path)?)?;
        let (shape, group) = parse_profiles(&v)?;
        let spec = SpecSource::load(&a.spec, &mut m)?.for_shape(shape.1, shape.2, seed)?;
        let mc = a.monte_carlo.map(|n| MonteCarloOptions { n, seed });
        let audits = alphas
            .iter()
            .map(|&alpha| audit_group(&group, &spec, shape, alpha, a.epsilon, mc))
            .collect::<Result<Vec<_>>>()?;
        text += "alpha     n_min  neighbor counts\n";
        for au in &audits {
            text += &format!("{:<8}  {:>5}  {:?}\n", au.alpha, au.n_min, au.neighbor_counts);
        }
        m.write_output("audit.json", &to_json_bytes(&audits)?)?;
        config["spec"] = spec.to_json();
    }
    if a.check_props {
        let suite = proposition_suite(8, 8, a.cases, seed)?;
        text += &format!(
            "prop1 max gap {:.3e} over {} cases\nprop2 crop groups {}/{} with n_min = |G|-1\nprop3 violations {}/{}, all-zeros vs all-ones: before {} after {}\nprop4 violations {}/{}\n",
            suite.prop1.extreme,
            suite.prop1.cases,
            suite.prop2_crop_groups.cases - suite.prop2_crop_groups.violations,
            suite.prop2_crop_groups.cases,
            suite.prop3.violations,
            suite.prop3.cases,
            crate::json::fmt_real(suite.prop3_pathology.before, 3),
            crate::json::fmt_real(suite.prop3_pathology.after, 3),
            suite.prop4.violations,
            suite.prop4.cases,
        );
        text += if suite.all_hold() { "all propositions hold\n" } else { "PROPOSITION VIOLATED\n" };
        m.write_output("propositions.json", &to_json_bytes(&suite)?)?;
        config["check_props"] = json!({ "width": 8, "height": 8, "cases": a.cases });
        if !suite.all_hold() {
            m.config = config;
            m.save()?;
            return Err(Error::Numeric("a proposition check failed; see propositions.json".into()));
        }
    }
    m.config = config;
    Ok((text, m))
}

fn load_rows(path: Option<&Path>, m: &mut RunManifest) -> Result<Vec<(String, RowSpec)>> {
    let Some(path) = path else {
        let mut rows: Vec<(String, RowSpec)> = table3_rows()
            .into_iter()
            .map(|r| (r.label, RowSpec::Preset(r.preset)))
            .collect();
        rows.push(("Crop".into(), RowSpec::Preset("crop".into())));
        return Ok(rows);
    };
    m.add_input(path)?;
    let v: Value = serde_json::from_slice(&read_file(path)?)?;
    let rows = v
        .get("rows")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidParam(format!("{}: expected {{\"rows\": [...]}}", path.display())))?;
    rows.iter()
        .map(|r| {
            let label = r
                .get("label")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::InvalidParam("row without label".into()))?
                .to_string();
            let spec = match (r.get("preset").and_then(Value::as_str), r.get("spec")) {
                (Some(p), None) => RowSpec::Preset(p.into()),
                (None, Some(s)) => RowSpec::Fixed(ObfuscationSpec::from_json_value(s, &[])?.resolved(path.parent())?),
                _ => return Err(Error::InvalidParam(format!("row {label}: give exactly one of preset, spec"))),
            };
            Ok((label, spec))
        })
        .collect()
}

enum RowSpec {
    Preset(String),
    Fixed(ObfuscationSpec),
}

fn load_dataset(a: &DiscriminateArgs, m: &mut RunManifest, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    match a.data.as_str() {
        "synth" => {
            let g = &a.glyphs;
            let (tr, te, _) = glyph_seeds(seed);
            Ok((
                synth_glyphs(g.classes, g.train_per_class, g.jitter, g.noise, tr)?,
                synth_glyphs(g.classes, a.test_per_class, g.jitter, g.noise, te)?,
            ))
        }
        "idx" => {
            let need = |p: &Option<PathBuf>, flag: &str| {
                p.clone()
                    .ok_or_else(|| Error::InvalidParam(format!("--data idx needs {flag}")))
            };
            let (ti, tl) = (need(&a.train_images, "--train-images")?, need(&a.train_labels, "--train-labels")?);
            let (si, sl) = (need(&a.test_images, "--test-images")?, need(&a.test_labels, "--test-labels")?);
            for p in [&ti, &tl, &si, &sl] {
                m.add_input(p)?;
            }
            Ok((load_idx(&ti, &tl)?, load_idx(&si, &sl)?))
        }
        other => Err(Error::InvalidParam(format!("unknown --data {other:?}; use synth or idx"))),
    }
}

fn cmd_discriminate(a: DiscriminateArgs, argv: &[String], seed: u64) -> Result<(String, RunManifest)> {
    make_out_dir(&a.out)?;
    let mut m = RunManifest::new("discriminate", argv, Value::Null, Some(seed), &a.out)?;
    let mut cfg = match &a.train_config {
        Some(p) => {
            m.add_input(p)?;
            serde_json::from_slice(&read_file(p)?)?
        }
        None => TrainConfig::default(),
    };
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    cfg.seed = seed;
    cfg.validate()?;
    let (train_ds, test_ds) = load_dataset(&a, &mut m, seed)?;
    let (_, w, h) = train_ds
        .shape()
        .ok_or_else(|| Error::InvalidParam("empty training set".into()))?;
    let specs = load_rows(a.specs.as_deref(), &mut m)?
        .into_iter()
        .map(|(label, r)| {
            let spec = match r {
                RowSpec::Fixed(s) => s,
                RowSpec::Preset(p) => preset_spec(
                    &p,
                    &PresetContext {
                        width: w,
                        height: h,
                        seed,
                        ..Default::default()
                    },
                )?,
            };
            Ok((label, spec))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = discrimination_report(&train_ds, &test_ds, &specs, &cfg)?;
    let text = report.to_text();
    m.write_output("discrimination_report.json", &to_json_bytes(&report)?)?;
    m.write_output("discrimination_report.txt", text.as_bytes())?;
    m.config = json!({
        "data": a.data,
        "train": cfg,
        "specs": specs.iter().map(|(l, s)| json!({"label": l, "spec": s.to_json()})).collect::<Vec<_>>(),
        "glyphs": if a.data == "synth" { json!({"classes": a.glyphs.classes, "train_per_class": a.glyphs.train_per_class,
            "test_per_class": a.test_per_class, "jitter": a.glyphs.jitter, "noise": a.glyphs.noise}) } else { Value::Null },
    });
    Ok((text, m))
}

fn replace_out(argv: &[String], out: &Path) -> Result<Vec<String>> {
    let mut v = Vec::with_capacity(argv.len());
    let mut replaced = false;
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
            v.push(a.clone());
            v.push(out.display().to_string());
            replaced = true;
        } else if a.starts_with("--out=") {
            v.push(format!("--out={}", out.display()));
            replaced = true;
        } else {
            v.push(a.clone());
        }
    }
    ensure!(replaced, Error::InvalidParam("manifest argv has no --out".into()));
    Ok(v)
}

#[derive(Debug, Serialize)]
struct ReproReport {
    manifest: PathBuf,
    rerun_dir: PathBuf,
    changed_inputs: Vec<PathBuf>,
    comparison: OutputComparison,
    bit_identical: bool,
}

/// Re-runs a manifest's command in its recorded working directory. Changes
/// the process working directory for the duration of the re-run.
fn cmd_report(a: ReportArgs) -> Result<Outcome> {
    let path = if a.manifest.is_dir() {
        a.manifest.join(MANIFEST_FILE)
    } else {
        a.manifest.clone()
    };
    let original = RunManifest::load(&path)?;
    let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let rerun_dir = match &a.out {
        Some(o) => cwd.join(o),
        None => cwd.join(base).join("rerun"),
    };
    let changed = original.changed_inputs()?;
    ensure!(
        changed.is_empty(),
        Error::InvalidParam(format!("inputs changed since the run: {changed:?}"))
    );
    let argv = replace_out(&original.argv, &rerun_dir)?;
    std::env::set_current_dir(&original.cwd).map_err(|e| Error::io(&original.cwd, e))?;
    let rerun = run(&argv);
    std::env::set_current_dir(&cwd).map_err(|e| Error::io(&cwd, e))?;
    let rerun = rerun?
        .manifest
        .ok_or_else(|| Error::InvalidParam("manifest command records no outputs".into()))?;
    let comparison = original.compare_outputs(&rerun);
    let rep = ReproReport {
        manifest: path.clone(),
        rerun_dir: rerun_dir.clone(),
        changed_inputs: changed,
        bit_identical: comparison.bit_identical(),
        comparison,
    };
    crate::io::write_atomic(&rerun_dir.join("reproduction.json"), &to_json_bytes(&rep)?)?;
    let text = format!(
        "{}: {} of {} outputs bit-identical\n",
        original.command,
        rep.comparison.identical.len(),
        original.outputs.len()
    );
    ensure!(
        rep.bit_identical,
        Error::Numeric(format!(
            "{text}differing: {:?}, missing: {:?}",
            rep.comparison.differing, rep.comparison.missing
        ))
    );
    Ok(Outcome { text, manifest: None })
}

fn cmd_fixtures(a: FixtureArgs) -> Result<Outcome> {
    let root = a.fixtures.unwrap_or_else(fixture_root);
    let outcomes = check_all(&root)?;
    ensure!(
        !outcomes.is_empty(),
        Error::InvalidParam(format!("no fixtures under {}", root.display()))
    );
    let mut text = String::new();
    let mut failed = 0;
    for o in &outcomes {
        let status = if o.passed() { "ok" } else { "MISMATCH" };
        failed += usize::from(!o.passed());
        text += &format!("{status:<8} {} ({}, {} of {} bytes differ)\n", o.case, o.method, o.mismatches, o.pixels);
    }
    text += &format!("{} of {} fixtures reproduced\n", outcomes.len() - failed, outcomes.len());
    ensure!(failed == 0, Error::Numeric(text));
    Ok(Outcome { text, manifest: None })
}
