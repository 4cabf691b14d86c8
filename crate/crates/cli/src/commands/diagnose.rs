//! `diagnose`: statistical self-checks as a JSON report. Exit 0 iff
//! every selected check passes.

use antikit::antithetic::{
    antithetic_hawkins_wixley, antithetic_sample, antithetic_variance_exact,
    antithetic_wilson_hilferty, sample_moments, Chi2Scaling, PopulationMoments, VarianceMode,
};
use antikit::constrained::{marsaglia_sample, MomentSpec, Provenance, SampleBatch};
use antikit::randkit::{chi2_cdf, chi2_inverse_cdf, gaussian_cdf, Dof, RngStream};
use antikit::stats;
use antikit::{Error, Result};
use clap::Args;

use crate::commands::parse_scaling;
use crate::config;
use crate::exit;

#[derive(Args)]
pub struct DiagnoseArgs {
    /// JSON config file; flags override its fields
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// corrected or paper-faithful
    #[arg(long)]
    scaling: Option<String>,
    /// Run a single named check instead of the full suite
    #[arg(long)]
    check: Option<String>,
    /// Batches for the sampling-based checks
    #[arg(long)]
    reps: Option<usize>,
    /// Output path, or - for stdout
    #[arg(long)]
    out: Option<String>,
}

#[derive(serde::Serialize)]
struct CheckOut {
    check: String,
    statistic: f64,
    p_value: Option<f64>,
    pass: bool,
}

#[derive(serde::Serialize)]
struct Report {
    checks: Vec<CheckOut>,
    all_pass: bool,
}

const MU: f64 = 0.4;
const SIGMA2: f64 = 1.5;
const K: usize = 8;

/// Pooled Marsaglia batches with moments drawn from their sampling
/// distributions: eta ~ N(mu, sigma2/k), lambda ~ chi2(k-1) scaled per
/// the chosen convention.
fn pooled_marginal(reps: usize, scaling: Chi2Scaling, stream: &mut RngStream) -> Result<Vec<f64>> {
    let mut all = Vec::with_capacity(reps * K);
    let denom = match scaling {
        Chi2Scaling::Corrected => K as f64,
        Chi2Scaling::PaperFaithful => (K - 1) as f64,
    };
    for _ in 0..reps {
        let eta = MU + (SIGMA2 / K as f64).sqrt() * stream.next_normal();
        let lambda: f64 = (0..K - 1).map(|_| stream.next_normal().powi(2)).sum();
        let delta2 = lambda * SIGMA2 / denom;
        let eps: Vec<f64> = (0..K - 1).map(|_| stream.next_normal()).collect();
        let spec = MomentSpec::new(eta, delta2, K)?;
        all.extend(marsaglia_sample(&eps, &spec)?.values);
    }
    Ok(all)
}

fn check_marginal(
    name: &str,
    reps: usize,
    scaling: Chi2Scaling,
    seed: u64,
    gof: bool,
) -> Result<CheckOut> {
    let mut stream = RngStream::new(seed, 10);
    let all = pooled_marginal(reps, scaling, &mut stream)?;
    let cdf = |x: f64| gaussian_cdf(x, MU, SIGMA2).expect("fixed positive variance");
    let v = if gof {
        stats::chi2_gof(&all, cdf, 20, 0.01)?
    } else {
        stats::ks_test(&all, cdf, 0.01)?
    };
    Ok(CheckOut { check: name.into(), statistic: v.statistic, p_value: Some(v.p_value), pass: v.pass })
}

fn check_pooled_mean(reps: usize, scaling: Chi2Scaling, seed: u64) -> Result<CheckOut> {
    let mut stream = RngStream::new(seed, 11);
    let pop = PopulationMoments::new(MU, SIGMA2)?;
    let sigma = SIGMA2.sqrt();
    let mut worst = 0.0_f64;
    for rep in 0..reps {
        let vm = if rep % 2 == 0 { VarianceMode::Exact } else { VarianceMode::HawkinsWixley };
        let first = SampleBatch::new(
            (0..K).map(|_| MU + sigma * stream.next_normal()).collect::<Vec<f64>>(),
            Provenance::Iid,
        );
        let eps: Vec<f64> = (0..K - 1).map(|_| stream.next_normal()).collect();
        let second = antithetic_sample(&first, &pop, &eps, vm, scaling)?;
        let pooled = (first.values.iter().sum::<f64>() + second.values.iter().sum::<f64>())
            / (2 * K) as f64;
        worst = worst.max((pooled - MU).abs());
    }
    Ok(CheckOut { check: "pooled-mean".into(), statistic: worst, p_value: None, pass: worst < 1e-12 })
}

fn check_involution(exact: bool, scaling: Chi2Scaling) -> Result<CheckOut> {
    let mut worst = 0.0_f64;
    for &k in &[4usize, 8, 20] {
        for &d2 in &[0.1, 0.7, 1.0, 3.0] {
            let (once, twice) = if exact {
                let a = antithetic_variance_exact(&d2, &SIGMA2, k, scaling)?;
                let b = antithetic_variance_exact(&a.delta2, &SIGMA2, k, scaling)?;
                (a.delta2, b.delta2)
            } else {
                let a = antithetic_hawkins_wixley(&d2, &SIGMA2, k, scaling)?;
                let b = antithetic_hawkins_wixley(&a.delta2, &SIGMA2, k, scaling)?;
                (a.delta2, b.delta2)
            };
            let _ = once;
            worst = worst.max((twice - d2).abs() / d2.max(1.0));
        }
    }
    let (name, tol) = if exact { ("involution-exact", 1e-9) } else { ("involution-hw", 1e-12) };
    Ok(CheckOut { check: name.into(), statistic: worst, p_value: None, pass: worst < tol })
}

fn check_hw_vs_exact() -> Result<CheckOut> {
    // quantile-space distance over the central 98% of chi-squared mass
    let mut worst = 0.0_f64;
    for &v in &[5u64, 7, 15, 39] {
        let dof = Dof::new(v)?;
        let lo = chi2_inverse_cdf(0.01, dof)?;
        let hi = chi2_inverse_cdf(0.99, dof)?;
        let k = (v + 1) as usize;
        for i in 0..200 {
            let lam = lo + (hi - lo) * i as f64 / 199.0;
            let d2 = lam / k as f64; // sigma2 = 1
            let ex = antithetic_variance_exact(&d2, &1.0, k, Chi2Scaling::Corrected)?;
            let hw = antithetic_hawkins_wixley(&d2, &1.0, k, Chi2Scaling::Corrected)?;
            let u_ex = chi2_cdf(k as f64 * ex.delta2, dof)?;
            let u_hw = chi2_cdf(k as f64 * hw.delta2, dof)?;
            worst = worst.max((u_hw - u_ex).abs());
        }
    }
    Ok(CheckOut { check: "hw-vs-exact".into(), statistic: worst, p_value: None, pass: worst <= 0.02 })
}

fn check_spearman(reps: usize, scaling: Chi2Scaling, seed: u64) -> Result<CheckOut> {
    let mut stream = RngStream::new(seed, 12);
    let sigma = SIGMA2.sqrt();
    let mut d1 = Vec::with_capacity(reps);
    let mut d2 = Vec::with_capacity(reps);
    for _ in 0..reps {
        let batch = SampleBatch::new(
            (0..K).map(|_| MU + sigma * stream.next_normal()).collect::<Vec<f64>>(),
            Provenance::Iid,
        );
        let m = sample_moments(&batch)?;
        let v = antithetic_variance_exact(&m.delta2, &SIGMA2, K, scaling)?;
        d1.push(m.delta2);
        d2.push(v.delta2);
    }
    let rho = stats::spearman(&d1, &d2)?;
    Ok(CheckOut {
        check: "spearman-variance".into(),
        statistic: rho,
        p_value: None,
        pass: (rho + 1.0).abs() < 1e-12,
    })
}

fn check_wilson_hilferty() -> Result<CheckOut> {
    // search small dof for a lambda with a negative image
    let mut witness: Option<f64> = None;
    'outer: for k in 3usize..=6 {
        let v = (k - 1) as f64;
        for i in 1..=400 {
            let lam = i as f64 * v / 4.0;
            let out = antithetic_wilson_hilferty(lam / k as f64, 1.0, k, Chi2Scaling::Corrected)?;
            if out < 0.0 {
                witness = Some(out);
                break 'outer;
            }
        }
    }
    match witness {
        Some(w) => Ok(CheckOut {
            check: "wilson-hilferty-negativity".into(),
            statistic: w,
            p_value: None,
            pass: true,
        }),
        None => Ok(CheckOut {
            check: "wilson-hilferty-negativity".into(),
            statistic: 0.0,
            p_value: None,
            pass: false,
        }),
    }
}

pub fn run(args: DiagnoseArgs) -> Result<i32> {
    let cfg = match &args.config {
        Some(p) => config::load(p)?,
        None => Default::default(),
    };
    let seed = config::resolve(args.seed, &cfg, "seed", config::as_u64, config::default_seed()?)?;
    let scaling_s =
        config::resolve(args.scaling, &cfg, "scaling", config::as_string, "corrected".into())?;
    let scaling = parse_scaling(&scaling_s)?;
    let reps = config::resolve(args.reps, &cfg, "reps", config::as_usize, 12_500)?;
    let only = config::resolve(args.check, &cfg, "check", config::as_string, String::new())?;
    let out = config::resolve(args.out, &cfg, "out", config::as_string, "-".into())?;
    if reps == 0 {
        return Err(Error::Config("reps must be positive".into()));
    }

    let mut checks = Vec::new();
    let wanted = |name: &str| only.is_empty() || only == name;
    if wanted("marginal-ks") {
        checks.push(check_marginal("marginal-ks", reps, scaling, seed, false)?);
    }
    if wanted("marginal-gof") {
        checks.push(check_marginal("marginal-gof", reps, scaling, seed, true)?);
    }
    if wanted("pooled-mean") {
        checks.push(check_pooled_mean(reps.min(2000), scaling, seed)?);
    }
    if wanted("involution-exact") {
        checks.push(check_involution(true, scaling)?);
    }
    if wanted("involution-hw") {
        checks.push(check_involution(false, scaling)?);
    }
    if wanted("hw-vs-exact") {
        checks.push(check_hw_vs_exact()?);
    }
    if wanted("spearman-variance") {
        checks.push(check_spearman(reps.min(2000), scaling, seed)?);
    }
    if wanted("wilson-hilferty-negativity") {
        checks.push(check_wilson_hilferty()?);
    }
    if checks.is_empty() {
        return Err(Error::Config(format!("unknown check {only:?}")));
    }

    let all_pass = checks.iter().all(|c| c.pass);
    let report = Report { checks, all_pass };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    config::write_output(&out, &format!("{json}\n"))?;
    if all_pass {
        Ok(exit::OK)
    } else {
        let failed: Vec<&str> =
            report.checks.iter().filter(|c| !c.pass).map(|c| c.check.as_str()).collect();
        eprintln!("failed checks: {}", failed.join(", "));
        Ok(exit::CHECK_FAILED)
    }
}
