use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ags_core::diagnostics::characteristics;
use ags_core::io::{
    dataset_csv, diagnostics_csv, draws_csv, ess_csv, ks_curve_csv, raw_to_dataset, read_raw_csv_file, truth_csv,
    write_atomic, DiagnosticsRow,
};
use ags_core::special::KS_CURVE_COUNTS;
use ags_core::{
    generate, ks_curve, run_ags, run_mwg, AgsConfig, ChainOutput, DiagnosticsReport, Family, GroupedCountDataset,
    MwgConfig, RawDataset, SamplerKind, SynthSpec,
};

use crate::config::RunConfig;

pub type CmdResult<T = ()> = Result<T, String>;

fn err(e: ags_core::Error) -> String {
    e.to_string()
}

/// Files are rendered first and written only once everything succeeded.
struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn new(dir: &Path) -> Self {
        Artifacts {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn write(self) -> CmdResult<Vec<PathBuf>> {
        std::fs::create_dir_all(&self.dir).map_err(|e| format!("{}: {e}", self.dir.display()))?;
        let mut written = Vec::new();
        for (name, bytes) in self.files {
            let path = self.dir.join(name);
            write_atomic(&path, &bytes).map_err(err)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub struct GenArgs {
    pub family: Family,
    pub groups: usize,
    pub per_group: usize,
    pub covariates: usize,
    pub y_max: Option<f64>,
    pub seed: u64,
    pub name: String,
    pub drop_zeros: bool,
    pub output_dir: PathBuf,
}

pub fn cmd_gen(args: &GenArgs) -> CmdResult {
    let spec = match args.family {
        Family::Large => {
            if args.y_max.is_some() {
                return Err("--y-max applies to the small family only".into());
            }
            SynthSpec::large(args.groups, args.per_group, args.covariates, args.seed)
        }
        Family::Small => {
            let y_max = args.y_max.ok_or("the small family needs --y-max")?;
            SynthSpec::small(args.groups, args.per_group, args.covariates, y_max, args.seed)
        }
    };
    let synth = generate(&spec).map_err(err)?;
    let k = synth.data.num_covariates();
    let (data, truth) = if args.drop_zeros {
        let kept = synth.data.without_zeros().map_err(err)?;
        let labels: Vec<&str> = kept.groups().iter().map(|g| g.label()).collect();
        let truth: Vec<f64> = synth
            .data
            .groups()
            .iter()
            .enumerate()
            .filter(|(_, g)| labels.contains(&g.label()))
            .flat_map(|(jj, _)| synth.true_w[jj * k..(jj + 1) * k].iter().copied())
            .collect();
        (kept, truth)
    } else {
        (synth.data.clone(), synth.true_w.clone())
    };
    let mut out = Artifacts::new(&args.output_dir);
    out.add(format!("{}.csv", args.name), dataset_csv(&data).map_err(err)?);
    out.add(
        format!("{}_truth.csv", args.name),
        truth_csv(data.groups().len(), k, &truth).map_err(err)?,
    );
    let c = characteristics(data.counts());
    for p in out.write()? {
        println!("wrote {}", p.display());
    }
    println!("{}", describe_counts(&c, data.groups().len(), k));
    Ok(())
}

fn describe_counts(c: &ags_core::DataCharacteristics, j: usize, k: usize) -> String {
    let range = c.range.map_or("-".to_string(), |(lo, hi)| format!("[{lo}, {hi}]"));
    format!(
        "N_d={} J={j} K={k} RG={range} PCT_0={:.1}% PCT_1,5={:.1}%",
        c.n_d, c.pct_zero, c.pct_one_to_five
    )
}

struct Loaded {
    name: String,
    raw: RawDataset,
    data: GroupedCountDataset,
}

fn load(config: &RunConfig) -> CmdResult<Loaded> {
    let raw = read_raw_csv_file(&config.input).map_err(err)?;
    let data = raw_to_dataset(raw.clone(), config.shift_counts).map_err(err)?;
    let name = config
        .input
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    Ok(Loaded { name, raw, data })
}

fn run(config: &RunConfig, sampler: SamplerKind, data: &GroupedCountDataset) -> CmdResult<ChainOutput> {
    match sampler {
        SamplerKind::Ags => run_ags(data, &config.prior, &AgsConfig::from(config.chains)).map_err(err),
        SamplerKind::Mwg => {
            let mut mwg = MwgConfig::from(config.chains);
            if let Some(s) = config.step_scale {
                mwg.step_scale = s;
            }
            run_mwg(data, &config.prior, &mwg).map_err(err)
        }
    }
}

struct Fitted {
    output: ChainOutput,
    report: DiagnosticsReport,
}

fn fit_one(config: &RunConfig, sampler: SamplerKind, loaded: &Loaded) -> CmdResult<Fitted> {
    let output = run(config, sampler, &loaded.data)?;
    let mut report = DiagnosticsReport::compute(&output, &loaded.data).map_err(err)?;
    report.characteristics = characteristics(loaded.raw.counts());
    Ok(Fitted { output, report })
}

pub fn cmd_fit(config: &RunConfig) -> CmdResult {
    let loaded = load(config)?;
    let fitted = fit_one(config, config.sampler, &loaded)?;
    let s = config.sampler.name();
    let summary = summary_text(config, &loaded, &fitted);

    let mut out = Artifacts::new(&config.output_dir);
    out.add(format!("draws_{s}.csv"), draws_csv(&fitted.output).map_err(err)?);
    let row = DiagnosticsRow {
        dataset: &loaded.name,
        report: &fitted.report,
    };
    out.add(format!("diagnostics_{s}.csv"), diagnostics_csv(&[row], config.omit_timing).map_err(err)?);
    out.add(
        format!("ess_{s}.csv"),
        ess_csv(&fitted.output.parameter_names(), &fitted.report).map_err(err)?,
    );
    out.add(format!("summary_{s}.txt"), summary.clone().into_bytes());
    let written = out.write()?;
    print!("{summary}");
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub const NUTS_DISCLAIMER: &str = "# Baseline is an exact-likelihood Metropolis-within-Gibbs sampler (mwg), \
not NUTS/Stan; timings are machine-dependent and only their ratio is meaningful.";

pub fn cmd_compare(config: &RunConfig) -> CmdResult {
    let loaded = load(config)?;
    let ags = fit_one(config, SamplerKind::Ags, &loaded)?;
    let mwg = fit_one(config, SamplerKind::Mwg, &loaded)?;

    let rows = [
        DiagnosticsRow {
            dataset: &loaded.name,
            report: &mwg.report,
        },
        DiagnosticsRow {
            dataset: &loaded.name,
            report: &ags.report,
        },
    ];
    let mut table = String::new();
    writeln!(table, "{NUTS_DISCLAIMER}").unwrap();
    writeln!(table, "# {}", describe_counts(&ags.report.characteristics, loaded.data.num_groups(), loaded.data.num_covariates())).unwrap();
    writeln!(
        table,
        "{:<8} {:>12} {:>12} {:>10} {:>12}",
        "sampler", "T_s", "E_s", "R2", "RMSE"
    )
    .unwrap();
    for f in [&mwg, &ags] {
        let r = &f.report;
        let (t, e) = if config.omit_timing {
            ("NA".to_string(), "NA".to_string())
        } else {
            (format!("{:.4}", r.t_s), format!("{:.2}", r.e_s))
        };
        writeln!(table, "{:<8} {:>12} {:>12} {:>10.4} {:>12.4}", r.sampler, t, e, r.r2, r.rmse).unwrap();
    }
    if !config.omit_timing {
        writeln!(table, "# T_s ratio ags/mwg: {:.3}", ags.report.t_s / mwg.report.t_s).unwrap();
    }

    let mut out = Artifacts::new(&config.output_dir);
    out.add("draws_mwg.csv", draws_csv(&mwg.output).map_err(err)?);
    out.add("draws_ags.csv", draws_csv(&ags.output).map_err(err)?);
    out.add("comparison.csv", diagnostics_csv(&rows, config.omit_timing).map_err(err)?);
    out.add("comparison.txt", table.clone().into_bytes());
    let written = out.write()?;
    print!("{table}");
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn cmd_ks_curve(output_dir: &Path) -> CmdResult {
    let curve = ks_curve(&KS_CURVE_COUNTS).map_err(err)?;
    let mut out = Artifacts::new(output_dir);
    out.add("ks_curve.csv", ks_curve_csv(&curve).map_err(err)?);
    let written = out.write()?;
    println!("{:>4} {:>12} {:>14}", "y", "KS", "|mean error|");
    for p in &curve {
        println!("{:>4} {:>12.6} {:>14.3e}", p.y, p.ks_distance, p.abs_mean_error);
    }
    let monotone = curve.windows(2).all(|w| w[1].ks_distance <= w[0].ks_distance);
    println!("KS non-increasing in y: {}", if monotone { "yes" } else { "no" });
    println!("(trapezoidal CDF, 4097-point grid over +-8 sd; quadrature error below 1e-4)");
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn summary_text(config: &RunConfig, loaded: &Loaded, fitted: &Fitted) -> String {
    let r = &fitted.report;
    let o = &fitted.output;
    let mut s = String::new();
    let data = &loaded.data;
    writeln!(s, "sampler: {}", r.sampler).unwrap();
    writeln!(
        s,
        "dataset: {} ({})",
        loaded.name,
        describe_counts(&r.characteristics, data.num_groups(), data.num_covariates())
    )
    .unwrap();
    if let Some(shift) = config.shift_counts {
        writeln!(s, "counts shifted by {shift} before fitting").unwrap();
    }
    writeln!(
        s,
        "chains: {} x ({} warm-up + {} retained), seed {}, init {:?}",
        config.chains.n_chains, config.chains.n_warmup, config.chains.n_keep, config.chains.seed, config.chains.init
    )
    .unwrap();
    let p = &config.prior;
    writeln!(s, "prior: m={} tau2={} a={} b={}", p.m, p.tau2, p.a, p.b).unwrap();
    if !config.omit_timing {
        writeln!(s, "T_s (seconds per 1000 iterations): {:.5}", r.t_s).unwrap();
        writeln!(s, "E_s (mean ESS / T_s): {:.3}", r.e_s).unwrap();
    }
    writeln!(s, "mean ESS: {:.1}", r.mean_ess).unwrap();
    writeln!(s, "R2: {:.5}", r.r2).unwrap();
    writeln!(s, "RMSE: {:.5}", r.rmse).unwrap();
    let rates: Vec<String> = o
        .chains
        .iter()
        .filter_map(|c| c.acceptance_rate.map(|a| format!("{a:.3}")))
        .collect();
    if !rates.is_empty() {
        writeln!(s, "acceptance rate per chain: {}", rates.join(" ")).unwrap();
    }
    for note in &r.notes {
        writeln!(s, "note: {note}").unwrap();
    }
    writeln!(s, "fit uses exp(x . wbar) with wbar the posterior mean of the coefficients").unwrap();
    writeln!(s).unwrap();
    writeln!(s, "{:<14} {:>14} {:>14} {:>10}", "parameter", "mean", "sd", "ess").unwrap();
    let names = o.parameter_names();
    for (i, name) in names.iter().enumerate() {
        let all: Vec<f64> = o.series(i).into_iter().flatten().collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let sd = if all.len() > 1 {
            (all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            f64::NAN
        };
        writeln!(s, "{:<14} {:>14.6} {:>14.6} {:>10.1}", name, mean, sd, r.ess[i]).unwrap();
    }
    s
}
