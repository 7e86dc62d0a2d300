//! The `forest-link` verbs.
//!
//! Every verb writes its artifacts plus a `<verb>.json` [`Report`] into the
//! output directory and prints that report's path. Failures print one JSON
//! error record on stderr; exit code 2 means bad input, 3 a failed
//! computation.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use crate::angular::{aps_from_sweep, avg_asa, rms_asa};
use crate::error::{Error, Result};
use crate::fitting::{
    fit_model, fit_normal, pearson, shadow_residuals, Environment, FitOptions, LinkType, ModelFamily, ModelSpec,
    PathLossSample,
};
use crate::mpc::{extract, DelayStats};
use crate::ofdm::{apply_channel, SampleStream, Sounder, Sounding, StreamOrigin, Transmission};
use crate::pathloss::presets::{self as pl_presets, Forest};
use crate::pathloss::{
    hata_in_validity_range, pl_bhf, pl_bhf_m, pl_ci, pl_fe2r, pl_fe2r_m, pl_fspl, pl_fspl_h, pl_fspl_s, pl_hata,
    pl_sui, Fe2rParams, HataParams, HataVariant, LinkGeometry, ModelParams, SuiTerrain,
};
use crate::rng::derive_seed;
use crate::synth::presets::{channel_stats, targets, Scenario};
use crate::synth::{draw_shadowing_series, synth_forest_ensemble, synth_forest_profile};
use crate::tool::config::RunConfig;
use crate::tool::io::{self, Table};
use crate::tool::report::{AngularRow, FitRow, Report, StatRow, TOOL_NAME};
use crate::tool::svg::{Plot, Series};

/// Hata variants switch at this carrier.
const COST231_FROM_GHZ: f64 = 1.5;
/// Captured I/Q is scaled so the largest rail sits at this fraction of full scale.
const CAPTURE_HEADROOM: f64 = 0.9;
/// CIR bins drawn in `cir.svg`.
const PLOT_BINS: usize = 400;

#[derive(Debug, Parser)]
#[command(name = TOOL_NAME, version, about = "Forest radio channel toolkit")]
pub struct Cli {
    /// Config file; falls back to $FOREST_LINK_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed, overriding `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit path-loss model families to a measurement CSV.
    Fit(FitArgs),
    /// Evaluate the published models of a site and draw shadowed samples.
    Simulate(SimulateArgs),
    /// Run one synthetic sounding end to end.
    Sound(SoundArgs),
    /// Delay spread and K statistics over many captures.
    Extract(ExtractArgs),
    /// Azimuth spread of 12-sector sweeps.
    Angular(AngularArgs),
    /// Merge the reports found in a directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with columns dist_m,pl_db[,elev_deg,env,link].
    pub input: PathBuf,
    /// Comma-separated families; defaults depend on whether samples are A2G.
    #[arg(long, value_delimiter = ',')]
    pub family: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SiteArgs {
    #[arg(long, default_value = "larch", value_parser = parse_forest)]
    pub forest: Forest,
    #[arg(long, default_value = "g2g", value_parser = parse_scenario)]
    pub scenario: Scenario,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub site: SiteArgs,
    #[arg(long, default_value_t = 5.0)]
    pub d_min: f64,
    #[arg(long, default_value_t = 640.0)]
    pub d_max: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct SoundArgs {
    #[command(flatten)]
    pub site: SiteArgs,
    /// Profile CSV or JSON; a forest draw from the site targets otherwise.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// SNR in dB (`inf` for noiseless), overriding `snr_db`.
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<f64>,
    /// Also write the received capture as I/Q hex.
    #[arg(long)]
    pub capture: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// I/Q hex captures; synthetic captures of the site when none are given.
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub site: SiteArgs,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Args)]
pub struct AngularArgs {
    /// Sweep CSVs with columns azimuth_deg,rssi_dbm.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding `<verb>.json` reports; defaults to the output directory.
    pub dir: Option<PathBuf>,
}

fn parse_forest(s: &str) -> std::result::Result<Forest, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "larch" => Ok(Forest::Larch),
        "birch" => Ok(Forest::Birch),
        _ => Err(format!("unknown forest `{s}` (larch, birch)")),
    }
}

fn parse_scenario(s: &str) -> std::result::Result<Scenario, String> {
    Scenario::parse(s).ok_or_else(|| format!("unknown scenario `{s}` (g2g, a2g-30, a2g-60, a2g-90, mixed)"))
}

fn forest_name(f: Forest) -> &'static str {
    match f {
        Forest::Larch => "larch",
        Forest::Birch => "birch",
    }
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let record = json!({"error": {"code": "E_USAGE", "message": e.to_string().trim_end(), "file": null, "line": null}});
            eprintln!("{record}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(path) => {
            let _ = writeln!(std::io::stdout().lock(), "{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

/// The JSON error record printed on failure.
pub fn error_record(e: &Error) -> serde_json::Value {
    let (file, line) = e.location();
    json!({"error": {
        "code": e.code(),
        "message": e.to_string(),
        "file": file.map(|p| p.display().to_string()),
        "line": line,
    }})
}

/// Runs one verb; returns the path of the report it wrote.
pub fn run(cli: Cli) -> Result<PathBuf> {
    let mut cfg = RunConfig::resolve(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.output_dir = o;
    }
    let report = match &cli.command {
        Command::Fit(a) => cmd_fit(&cfg, a)?,
        Command::Simulate(a) => cmd_simulate(&cfg, a)?,
        Command::Sound(a) => cmd_sound(&cfg, a)?,
        Command::Extract(a) => cmd_extract(&cfg, a)?,
        Command::Angular(a) => cmd_angular(&cfg, a)?,
        Command::Report(a) => cmd_report(&cfg, a)?,
    };
    // Artifact writes create the output directory on first use.
    let path = cfg.output_dir.join(format!("{}.json", report.command));
    io::write_json(&path, &report)?;
    Ok(path)
}

fn write_text(cfg: &RunConfig, report: &mut Report, name: &str, text: &str) -> Result<()> {
    io::write_atomic(&cfg.output_dir.join(name), text.as_bytes())?;
    report.artifacts.push(name.to_string());
    Ok(())
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(Error::domain(format!("distance grid needs 0 < d_min < d_max and 2+ points, got [{lo}, {hi}] x {n}")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect())
}

fn hata_family(freq_ghz: f64) -> ModelFamily {
    if freq_ghz > COST231_FROM_GHZ {
        ModelFamily::Cost231Hata
    } else {
        ModelFamily::OkumuraHata
    }
}

// fit

pub fn cmd_fit(cfg: &RunConfig, args: &FitArgs) -> Result<Report> {
    let samples = io::read_pathloss_csv(&args.input)?;
    let a2g = samples.iter().any(|s| s.elev_deg.is_some() || s.link == LinkType::A2G);
    let families: Vec<ModelFamily> = if args.family.is_empty() {
        if a2g {
            vec![ModelFamily::Fspl, ModelFamily::FsplS, ModelFamily::Fe2r, ModelFamily::Fe2rM, hata_family(cfg.carrier_ghz)]
        } else {
            vec![ModelFamily::Fspl, ModelFamily::Ci, ModelFamily::FsplH, ModelFamily::Sui, ModelFamily::Bhf, ModelFamily::BhfM]
        }
    } else {
        args.family
            .iter()
            .map(|f| ModelFamily::parse(f).ok_or_else(|| Error::domain(format!("unknown model family `{f}`"))))
            .collect::<Result<_>>()?
    };

    let mut report = Report::new("fit", cfg);
    let opts = FitOptions { starts: cfg.fit_starts, seed: cfg.seed, ..FitOptions::default() };
    let mut fitted = Vec::new();
    for fam in families {
        let spec = ModelSpec::with_context(fam, cfg.model);
        let (params, row) = if spec.param_names().is_empty() {
            let params = spec.params_from_vec(&[])?;
            let resid = samples
                .iter()
                .map(|s| Ok(s.pl_db - spec.predict(&params, s)?))
                .collect::<Result<Vec<f64>>>()?;
            let rmse = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
            let row = FitRow {
                family: fam.name().to_string(),
                params: Default::default(),
                rmse_db: rmse,
                n_samples: samples.len(),
                converged: true,
                shadowing_db: fit_normal(&resid).ok(),
            };
            (params, row)
        } else {
            let bounds = cfg.bounds_for(&spec);
            let init: Vec<f64> = spec
                .default_init()
                .iter()
                .zip(bounds.lower.iter().zip(&bounds.upper))
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                .collect();
            let fit = fit_model(&samples, &spec, &bounds, &init, &opts)?;
            let shadow = if fit.converged {
                fit_normal(&shadow_residuals(&fit, &samples)?).ok()
            } else {
                report.notes.push(format!("{}: optimizer did not converge", fam.name()));
                None
            };
            (fit.params, FitRow::from_fit(&fit, shadow))
        };
        if let ModelParams::Hata(h) = &params {
            let outside = samples.iter().filter(|s| !hata_in_validity_range(&spec.geometry(s), h)).count();
            if outside > 0 {
                report.notes.push(format!(
                    "{}: {outside} of {} samples lie outside the model's validity range and are extrapolated",
                    fam.name(),
                    samples.len()
                ));
            }
        }
        report.fits.push(row);
        fitted.push((spec, params));
    }

    let mut plot = Plot::new("Path loss fits", "distance (m)", "path loss (dB)");
    plot.log_x = true;
    plot.series.push(Series::markers("measured", samples.iter().map(|s| (s.dist_m, s.pl_db)).collect()));
    let (lo, hi) = samples.iter().fold((f64::INFINITY, 0.0f64), |(a, b), s| (a.min(s.dist_m), b.max(s.dist_m)));
    if hi > lo {
        let elev = samples.iter().find_map(|s| s.elev_deg);
        let grid = log_grid(lo, hi, 120)?;
        for (spec, params) in &fitted {
            let pts = grid
                .iter()
                .map(|&d| {
                    let s = PathLossSample { elev_deg: elev, ..PathLossSample::new(d, 0.0) };
                    (d, spec.predict(params, &s).unwrap_or(f64::NAN))
                })
                .collect();
            plot.series.push(Series::line(spec.family.name(), pts));
        }
    }
    let fits_csv = report.fits_csv();
    write_text(cfg, &mut report, "fit.csv", &fits_csv)?;
    write_text(cfg, &mut report, "fit.svg", &plot.render())?;
    Ok(report)
}

// simulate

pub fn cmd_simulate(cfg: &RunConfig, args: &SimulateArgs) -> Result<Report> {
    let (forest, scenario) = (args.site.forest, args.site.scenario);
    if scenario == Scenario::Mixed {
        return Err(Error::domain("simulate needs a single link scenario, not `mixed`"));
    }
    let grid = log_grid(args.d_min, args.d_max, args.points)?;
    let m = &cfg.model;
    let elev = scenario.elev_deg();
    let geom = |d: f64| {
        LinkGeometry::new(cfg.carrier_ghz, d)
            .with_elevation(elev.unwrap_or(0.0))
            .with_rx_height(m.rx_height_m)
            .with_veg_depth(m.veg_depth_m)
    };

    type Curve = Box<dyn Fn(&LinkGeometry) -> Result<f64>>;
    let mut curves: Vec<(String, Curve)> = vec![("fspl".into(), Box::new(pl_fspl))];
    let default_model;
    match elev {
        None => {
            let n = pl_presets::ci_n(forest);
            let h = pl_presets::fspl_h(forest);
            let b = pl_presets::bhf(forest);
            let mut bm = pl_presets::bhf_m(forest, cfg.bhf_m_columns);
            bm.junction = m.bhf_m_junction;
            curves.push(("ci".into(), Box::new(move |g| pl_ci(g, n))));
            curves.push(("fspl-h".into(), Box::new(move |g| pl_fspl_h(g, &h))));
            for (name, t) in [("sui-a", SuiTerrain::A), ("sui-b", SuiTerrain::B), ("sui-c", SuiTerrain::C)] {
                let p = pl_presets::sui(t, forest, m.sui_bs_height_m);
                curves.push((name.into(), Box::new(move |g| pl_sui(g, &p))));
            }
            curves.push(("bhf".into(), Box::new(move |g| pl_bhf(g, &b))));
            curves.push(("bhf-m".into(), Box::new(move |g| pl_bhf_m(g, &bm))));
            default_model = "bhf-m";
        }
        Some(e) => {
            let f = Fe2rParams { reading: m.reflection, ..Fe2rParams::default() };
            curves.push(("fe2r".into(), Box::new(move |g| pl_fe2r(g, &f))));
            let mut fm = pl_presets::fe2r_m(forest, e).ok_or_else(|| Error::domain(format!("no two-ray preset at {e} deg")))?;
            fm.reading = m.reflection;
            curves.push(("fe2r-m".into(), Box::new(move |g| pl_fe2r_m(g, &fm))));
            if forest == Forest::Larch && e == 30.0 {
                let s = pl_presets::fspl_s_larch_30();
                curves.push(("fspl-s".into(), Box::new(move |g| pl_fspl_s(g, &s))));
            }
            let hp = HataParams {
                bs_height_m: m.hata_bs_height_m,
                ms_height_m: m.hata_ms_height_m,
                variant: if hata_family(cfg.carrier_ghz) == ModelFamily::Cost231Hata {
                    HataVariant::Cost231
                } else {
                    HataVariant::OkumuraHata
                },
                area: m.hata_area,
            };
            curves.push((hata_family(cfg.carrier_ghz).name().into(), Box::new(move |g| pl_hata(g, &hp))));
            default_model = "fe2r-m";
        }
    }

    let mut report = Report::new("simulate", cfg);
    let mut names = vec!["dist_m"];
    names.extend(curves.iter().map(|(n, _)| n.as_str()));
    let mut table = Table::new(&names);
    for &d in &grid {
        let g = geom(d);
        let mut row = vec![d];
        for (_, c) in &curves {
            row.push(c(&g)?);
        }
        table.rows.push(row);
    }

    let sigma = channel_stats(forest, scenario).shadowing_db.sigma;
    let shadow = draw_shadowing_series(sigma, grid.len(), cfg.seed)?;
    let base = table.column(default_model).expect("default model is tabulated");
    let samples: Vec<PathLossSample> = grid
        .iter()
        .zip(base.iter().zip(&shadow))
        .map(|(&d, (pl, x))| PathLossSample {
            dist_m: d,
            pl_db: pl + x,
            elev_deg: elev,
            env: match forest {
                Forest::Larch => Environment::Larch,
                Forest::Birch => Environment::Birch,
            },
            link: if elev.is_some() { LinkType::A2G } else { LinkType::G2G },
        })
        .collect();
    report.metrics.insert("shadowing_sigma_db".into(), sigma);
    report.notes.push(format!(
        "{} {}: samples follow {default_model} with lognormal shadowing",
        forest_name(forest),
        scenario.name()
    ));

    let mut plot = Plot::new(&format!("{} {}", forest_name(forest), scenario.name()), "distance (m)", "path loss (dB)");
    plot.log_x = true;
    for (i, (name, _)) in curves.iter().enumerate() {
        plot.series.push(Series::line(name, table.rows.iter().map(|r| (r[0], r[i + 1])).collect()));
    }
    plot.series.push(Series::markers("samples", samples.iter().map(|s| (s.dist_m, s.pl_db)).collect()));

    write_text(cfg, &mut report, "curves.csv", &table.to_csv())?;
    write_text(cfg, &mut report, "samples.csv", &io::pathloss_csv_string(&samples))?;
    write_text(cfg, &mut report, "curves.svg", &plot.render())?;
    Ok(report)
}

// sound

fn sounder(cfg: &RunConfig) -> Sounder {
    Sounder { frame: cfg.frame.clone(), ..Sounder::default() }
}

fn cir_table(cir: &SampleStream) -> Table {
    let ts_ns = 1e9 / cir.fs_hz;
    let mut t = Table::new(&["delay_ns", "re", "im", "power_db"]);
    t.rows = cir
        .samples
        .iter()
        .enumerate()
        .map(|(i, c)| vec![i as f64 * ts_ns, c.re, c.im, 10.0 * c.norm_sqr().log10()])
        .collect();
    t
}

fn metrics_of(stats: &DelayStats, report: &mut Report) {
    report.metrics.insert("n_taps".into(), stats.n_taps as f64);
    report.metrics.insert("mean_delay_ns".into(), stats.mean_delay_ns);
    report.metrics.insert("rms_ds_ns".into(), stats.rms_ds_ns);
    if let Some(k) = stats.k_db {
        report.metrics.insert("k_db".into(), k);
    }
}

/// Scales `rx` so its largest rail sits at [`CAPTURE_HEADROOM`] of full scale.
fn normalized_capture(rx: &SampleStream) -> SampleStream {
    let peak = rx.samples.iter().fold(0.0f64, |m, c| m.max(c.re.abs()).max(c.im.abs()));
    let g = if peak > 0.0 { CAPTURE_HEADROOM / peak } else { 1.0 };
    SampleStream::new(rx.samples.iter().map(|c| c * g).collect(), rx.fs_hz, StreamOrigin::Rx)
}

pub fn cmd_sound(cfg: &RunConfig, args: &SoundArgs) -> Result<Report> {
    let snd = sounder(cfg);
    let profile = match &args.profile {
        Some(p) => io::read_profile(p)?,
        None => synth_forest_profile(&targets(args.site.forest, args.site.scenario), cfg.seed)?,
    };
    let snr = args.snr.unwrap_or(cfg.snr_db);
    let tx = snd.transmit()?;
    let rx = apply_channel(&tx.capture, &profile, snr, cfg.seed)?;
    let s = snd.receive(&rx, &tx)?;
    let (taps, stats) = extract(&s.cir_zc, &cfg.peak)?;

    let mut report = Report::new("sound", cfg);
    metrics_of(&stats, &mut report);
    report.metrics.insert("sync_offset".into(), s.sync.offset as f64);
    report.metrics.insert("sync_ratio".into(), s.sync.ratio());
    if snr.is_finite() {
        report.metrics.insert("snr_db".into(), snr);
    } else {
        report.notes.push("noiseless channel".into());
    }
    if let Some(k) = profile.analytic_k_db() {
        report.metrics.insert("profile_k_db".into(), k);
    }
    report.metrics.insert("profile_rms_ds_ns".into(), profile.analytic_rms_ds_s() * 1e9);

    write_text(cfg, &mut report, "cir_zc.csv", &cir_table(&s.cir_zc).to_csv())?;
    write_text(cfg, &mut report, "cir_cfr.csv", &cir_table(&s.cir_cfr).to_csv())?;
    write_text(cfg, &mut report, "cir_cfr_windowed.csv", &cir_table(&s.cir_cfr_windowed).to_csv())?;
    let mut cfr = Table::new(&["bin", "re", "im", "mag_db"]);
    cfr.rows = s
        .cfr
        .iter()
        .enumerate()
        .map(|(i, c)| vec![i as f64, c.re, c.im, 20.0 * c.norm().log10()])
        .collect();
    write_text(cfg, &mut report, "cfr.csv", &cfr.to_csv())?;
    io::write_json(&cfg.output_dir.join("profile.json"), &profile.records())?;
    report.artifacts.push("profile.json".into());
    let mut tap_table = Table::new(&["delay_ns", "power"]);
    tap_table.rows = taps.taps.iter().map(|t| vec![t.delay_s * 1e9, t.power]).collect();
    write_text(cfg, &mut report, "taps.csv", &tap_table.to_csv())?;
    write_text(cfg, &mut report, "cir.svg", &cir_plot(&s).render())?;
    if args.capture {
        io::write_iq_hex(&cfg.output_dir.join("capture.hex"), &normalized_capture(&rx))?;
        report.artifacts.push("capture.hex".into());
    }
    Ok(report)
}

fn cir_plot(s: &Sounding) -> Plot {
    let mut plot = Plot::new("Channel impulse response", "delay (ns)", "power (dB)");
    for (name, cir) in [("zc", &s.cir_zc), ("cfr", &s.cir_cfr), ("cfr windowed", &s.cir_cfr_windowed)] {
        let peak = cir.powers().into_iter().fold(0.0, f64::max);
        let ts_ns = 1e9 / cir.fs_hz;
        let pts = cir
            .samples
            .iter()
            .take(PLOT_BINS)
            .enumerate()
            .map(|(i, c)| (i as f64 * ts_ns, 10.0 * (c.norm_sqr() / peak).log10().max(-80.0)))
            .collect();
        plot.series.push(Series::line(name, pts));
    }
    plot
}

// extract

fn sound_one(snd: &Sounder, tx: &Transmission, rx: &SampleStream, cfg: &RunConfig) -> Result<DelayStats> {
    let s = snd.receive(rx, tx)?;
    extract(&s.cir_zc, &cfg.peak).map(|(_, st)| st)
}

pub fn cmd_extract(cfg: &RunConfig, args: &ExtractArgs) -> Result<Report> {
    let snd = sounder(cfg);
    let tx = snd.transmit()?;
    let snr = args.snr.unwrap_or(cfg.snr_db);
    let (label, results): (String, Vec<(String, Result<DelayStats>)>) = if args.inputs.is_empty() {
        if args.count < 2 {
            return Err(Error::arity("extract needs at least 2 synthetic captures"));
        }
        let t = targets(args.site.forest, args.site.scenario);
        let ens = synth_forest_ensemble(&t, args.count, cfg.seed)?;
        let res = ens
            .par_iter()
            .enumerate()
            .map(|(i, r)| {
                let rx = apply_channel(&tx.capture, &r.profile, snr, derive_seed(cfg.seed, i as u64));
                (format!("synthetic #{i}"), rx.and_then(|rx| sound_one(&snd, &tx, &rx, cfg)))
            })
            .collect();
        (format!("{}-{}", forest_name(args.site.forest), args.site.scenario.name()), res)
    } else {
        let res = args
            .inputs
            .par_iter()
            .map(|p| {
                let rx = io::read_iq_hex(p, cfg.frame.fs_hz);
                (p.display().to_string(), rx.and_then(|rx| sound_one(&snd, &tx, &rx, cfg)))
            })
            .collect();
        ("captures".to_string(), res)
    };
    let label = args.label.clone().unwrap_or(label);

    let mut report = Report::new("extract", cfg);
    let mut table = Table::new(&["index", "n_taps", "mean_delay_ns", "rms_ds_ns", "k_db"]);
    let mut stats = Vec::new();
    for (i, (name, r)) in results.into_iter().enumerate() {
        match r {
            Ok(st) => {
                table.rows.push(vec![i as f64, st.n_taps as f64, st.mean_delay_ns, st.rms_ds_ns, st.k_db.unwrap_or(f64::NAN)]);
                stats.push(st);
            }
            // Input errors abort; per-capture computation failures are skipped.
            Err(e) if e.is_validation() => return Err(e),
            Err(e) => report.notes.push(format!("{name}: skipped, {e}")),
        }
    }
    if stats.len() < 2 {
        return Err(Error::arity(format!("only {} capture(s) produced statistics", stats.len())));
    }
    let ds: Vec<f64> = stats.iter().map(|s| s.rms_ds_ns).collect();
    let paired: Vec<(f64, f64)> = stats.iter().filter_map(|s| s.k_db.map(|k| (s.rms_ds_ns, k))).collect();
    let (pds, pk): (Vec<f64>, Vec<f64>) = paired.iter().copied().unzip();
    let undefined_k = stats.len() - paired.len();
    if undefined_k > 0 {
        report.notes.push(format!("{undefined_k} capture(s) had a single tap and no defined K"));
    }
    report.channel_stats.push(StatRow {
        label: label.clone(),
        n_captures: stats.len(),
        rms_ds_ns: fit_normal(&ds)?,
        k_db: fit_normal(&pk).ok(),
        ds_k_pearson: pearson(&pds, &pk).ok(),
        mean_taps: stats.iter().map(|s| s.n_taps as f64).sum::<f64>() / stats.len() as f64,
    });

    let mut plot = Plot::new(&format!("{label}: delay spread vs K"), "RMS delay spread (ns)", "K (dB)");
    plot.series.push(Series::markers(&label, paired));
    write_text(cfg, &mut report, "extract.csv", &table.to_csv())?;
    write_text(cfg, &mut report, "extract.svg", &plot.render())?;
    Ok(report)
}

// angular

pub fn cmd_angular(cfg: &RunConfig, args: &AngularArgs) -> Result<Report> {
    let mut report = Report::new("angular", cfg);
    let mut plot = Plot::new("Angular power spectrum", "azimuth (deg)", "normalized power");
    for p in &args.inputs {
        let sweep = io::read_sweep_csv(p)?;
        let aps = aps_from_sweep(&sweep)?;
        let avg = match avg_asa(&aps) {
            Ok(a) => Some(a),
            Err(Error::UndefinedMean) => None,
            Err(e) => return Err(e),
        };
        let peak = aps
            .azimuth_deg
            .iter()
            .zip(&aps.power)
            .fold((0.0, f64::NEG_INFINITY), |best, (a, w)| if *w > best.1 { (*a, *w) } else { best })
            .0;
        let source = p.display().to_string();
        report.angular.push(AngularRow { source: source.clone(), rms_asa_deg: rms_asa(&aps), avg_asa_deg: avg, peak_azimuth_deg: peak });
        plot.series.push(Series::line(&source, aps.azimuth_deg.iter().copied().zip(aps.power.iter().copied()).collect()));
    }
    write_text(cfg, &mut report, "angular.svg", &plot.render())?;
    Ok(report)
}

// report

pub fn cmd_report(cfg: &RunConfig, args: &ReportArgs) -> Result<Report> {
    let dir = args.dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    let mut report = Report::new("report", cfg);
    let mut merged = 0;
    for p in entries {
        // Other JSON artifacts (profiles, configs) are not reports.
        let Some(r) = read_report(&p) else { continue };
        if r.command == "report" {
            continue;
        }
        report.absorb(r);
        merged += 1;
    }
    if merged == 0 {
        return Err(Error::arity(format!("no {TOOL_NAME} reports in {}", dir.display())));
    }
    report.metrics.insert("reports_merged".into(), merged as f64);
    let mut plot = Plot::new("Delay spread and K by batch", "mean RMS delay spread (ns)", "mean K (dB)");
    for r in &report.channel_stats {
        if let Some(k) = &r.k_db {
            plot.series.push(Series::markers(&r.label, vec![(r.rms_ds_ns.mu, k.mu)]));
        }
    }
    let (fits, stats) = (report.fits_csv(), report.stats_csv());
    write_text(cfg, &mut report, "report_fits.csv", &fits)?;
    write_text(cfg, &mut report, "report_stats.csv", &stats)?;
    write_text(cfg, &mut report, "report.svg", &plot.render())?;
    Ok(report)
}

fn read_report(path: &Path) -> Option<Report> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str::<Report>(&text).ok().filter(|r| r.tool == TOOL_NAME)
}
