//! One function per experiment; each writes its artifacts and returns a summary.

use std::path::Path;

use aqml_core::ansatz::{
    construct_a2_qp_schedule, propagate, A2Options, AnsatzSpec, ParameterVector,
};
use aqml_core::landscape::{
    analyze_critical_point, gamma_spectrum, haar_checks, haar_overlap_scan,
    sign_flip_critical_losses, surjectivity_scan, Classification, HessianMethod,
    SurjectivityReport, NULL_OVERLAP_TOL, PERMUTATION_QUBIT_CAP,
};
use aqml_core::linalg::identity;
use aqml_core::magnus::{
    expand, squeezing_check, svd_sweep, Resolver, SeriesMode, SvdRow, SymbolicHamiltonian,
};
use aqml_core::pauli::{Convention, PauliString};
use aqml_core::training::{
    avg_channel_fidelity, convergence_metrics, loss_e, random_init, target_ising, target_jw,
    train_ensemble, trial_rng, TrainRecord,
};
use serde_json::{json, Value};

use crate::config::{
    pauli_arg, ExperimentConfig, ExperimentKind, REFERENCE_EPOCHS, REFERENCE_TRIALS,
};
use crate::manifest::MANIFEST_FILE;
use crate::CliError;

pub const SUMMARY_FILE: &str = "summary.json";

/// Files written by an experiment and its printable summary.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<String>,
    pub summary: String,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        debug_assert_ne!(name, MANIFEST_FILE);
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, summary: Value, text: String) -> Result<Artifacts, CliError> {
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        self.write(SUMMARY_FILE, &(json + "\n"))?;
        Ok(Artifacts {
            files: self.files,
            summary: text,
        })
    }
}

pub fn execute(cfg: &ExperimentConfig, dir: &Path) -> Result<Artifacts, CliError> {
    let w = Writer { dir, files: vec![] };
    use ExperimentKind::*;
    match cfg.experiment {
        TrainEnsemble => train(cfg, w),
        HessianAudit => hessian_audit(cfg, w),
        SurjectivityScan => surjectivity(cfg, w),
        MagnusTable => magnus_table(cfg, w),
        SvdAnalysis => svd_analysis(cfg, w),
        JwFidelity => jw_fidelity(cfg, w),
        SqueezingCheck => squeezing(cfg, w),
        A2Construction => a2_construction(cfg, w),
        GammaTheory => gamma_theory(cfg, w),
        HaarCheck => haar(cfg, w),
    }
}

fn scale_note(trials: usize, epochs: usize) -> String {
    format!("desk scale: {trials} trials x {epochs} epochs (reference: {REFERENCE_TRIALS} x {REFERENCE_EPOCHS})")
}

fn ensemble(
    cfg: &ExperimentConfig,
) -> Result<(AnsatzSpec, Vec<TrainRecord>, aqml_core::linalg::CMat), CliError> {
    let spec = cfg.ansatz_block()?.build()?;
    let target = cfg
        .target_block()?
        .build(spec.num_qubits, spec.total_time)?;
    let opt = cfg.optimizer()?;
    let records = train_ensemble(&spec, &target.w, &opt, cfg.trials(), cfg.seed)?;
    Ok((spec, records, target.w))
}

fn trials_csv(records: &[TrainRecord]) -> String {
    let mut s = String::from("trial,final_loss,epochs,converged\n");
    for (i, r) in records.iter().enumerate() {
        s.push_str(&format!(
            "{i},{:e},{},{}\n",
            r.final_loss, r.epochs, r.converged
        ));
    }
    s
}

fn stats(v: &[f64]) -> (f64, f64, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, min, max)
}

fn train(cfg: &ExperimentConfig, mut w: Writer) -> Result<Artifacts, CliError> {
    let (spec, records, _) = ensemble(cfg)?;
    let epochs = cfg.optimizer()?.epochs;
    w.write("trials.csv", &trials_csv(&records))?;
    let m = convergence_metrics(&records)?;
    let mut conv = String::from("epoch,grad_norm_mean,grad_diff_norm_mean\n");
    for (i, (g, d)) in m
        .grad_norm_mean
        .iter()
        .zip(&m.grad_diff_norm_mean)
        .enumerate()
    {
        conv.push_str(&format!("{i},{g:e},{d:e}\n"));
    }
    w.write("convergence.csv", &conv)?;
    let losses: Vec<f64> = records.iter().map(|r| r.final_loss).collect();
    let (mean, min, max) = stats(&losses);
    let converged = records.iter().filter(|r| r.converged).count();
    let note = scale_note(records.len(), epochs);
    let text = format!(
        "train-ensemble: N = {}, {} parameters, {} trials\nfinal loss mean {mean:.3e}, min {min:.3e}, max {max:.3e}\nconverged {converged}/{}\n{note}\n",
        spec.num_qubits,
        spec.num_params(),
        records.len(),
        records.len()
    );
    let summary = json!({
        "experiment": "train-ensemble",
        "num_qubits": spec.num_qubits,
        "num_params": spec.num_params(),
        "trials": records.len(),
        "epochs": epochs,
        "mean_loss": mean,
        "min_loss": min,
        "max_loss": max,
        "converged": converged,
        "scale_note": note,
    });
    w.finish(summary, text)
}

fn class_name(c: Classification) -> String {
    format!("{c:?}").to_lowercase()
}

fn hessian_audit(cfg: &ExperimentConfig, mut w: Writer) -> Result<Artifacts, CliError> {
    let (spec, records, target) = ensemble(cfg)?;
    let opt = cfg.optimizer()?;
    let (method, slices) = match &cfg.hessian {
        Some(h) => (
            h.method.unwrap_or(HessianMethod::FdOfAnalyticGrad),
            h.slices.unwrap_or(opt.slices),
        ),
        None => (HessianMethod::FdOfAnalyticGrad, opt.slices),
    };
    w.write("trials.csv", &trials_csv(&records))?;
    let mut points = String::from(
        "trial,loss,grad_norm,min_eigenvalue,max_eigenvalue,negative,zero,positive,classification\n",
    );
    let mut eigs = String::from("trial,index,eigenvalue\n");
    let (mut minima, mut saddles, mut maxima) = (0usize, 0usize, 0usize);
    let mut text = format!(
        "hessian-audit: N = {}, {} parameters, {} trials\n",
        spec.num_qubits,
        spec.num_params(),
        records.len()
    );
    for (i, r) in records.iter().enumerate() {
        let rep = analyze_critical_point(
            &spec,
            &ParameterVector::new(r.final_theta.clone()),
            &target,
            slices,
            method,
        )?;
        let neg = rep
            .eigenvalues
            .iter()
            .filter(|&&e| e < -rep.tolerance)
            .count();
        let pos = rep
            .eigenvalues
            .iter()
            .filter(|&&e| e > rep.tolerance)
            .count();
        match rep.classification {
            Classification::Minimum => minima += 1,
            Classification::Saddle => saddles += 1,
            Classification::Maximum => maxima += 1,
            _ => {}
        }
        points.push_str(&format!(
            "{i},{:e},{:e},{:e},{:e},{neg},{},{pos},{}\n",
            rep.loss,
            rep.grad_norm,
            rep.min_eigenvalue(),
            rep.max_eigenvalue(),
            rep.zero_eigenvalues,
            class_name(rep.classification)
        ));
        for (j, e) in rep.eigenvalues.iter().enumerate() {
            eigs.push_str(&format!("{i},{j},{e:e}\n"));
        }
        text.push_str(&format!(
            "trial {i}: loss {:.3e}, eigenvalues {neg} negative / {} zero / {pos} positive, {}\n",
            rep.loss,
            rep.zero_eigenvalues,
            class_name(rep.classification)
        ));
    }
    w.write("points.csv", &points)?;
    w.write("eigenvalues.csv", &eigs)?;
    let note = scale_note(records.len(), opt.epochs);
    text.push_str(&format!(
        "{minima} minima, {saddles} saddles, {maxima} maxima\n{note}\n"
    ));
    let summary = json!({
        "experiment": "hessian-audit",
        "num_qubits": spec.num_qubits,
        "num_params": spec.num_params(),
        "trials": records.len(),
        "method": method,
        "minima": minima,
        "saddles": saddles,
        "maxima": maxima,
        "scale_note": note,
    });
    w.finish(summary, text)
}

fn generators(spec: &AnsatzSpec) -> Result<Vec<PauliString>, CliError> {
    let mut g = spec.coupling_strings();
    for c in &spec.controls {
        g.push(PauliString::single(
            spec.num_qubits,
            c.qubit,
            c.axis.pauli(),
        )?);
    }
    g.sort();
    g.dedup();
    Ok(g)
}

fn surjectivity(cfg: &ExperimentConfig, mut w: Writer) -> Result<Artifacts, CliError> {
    let spec = cfg.ansatz_block()?.build()?;
    let scan = cfg.scan_block()?;
    let slices = scan.slices.unwrap_or(40);
    let rep: SurjectivityReport = if scan.haar {
        haar_overlap_scan(spec.num_qubits, &generators(&spec)?, scan.samples, cfg.seed)?
    } else {
        surjectivity_scan(&spec, scan.samples, scan.distribution(), slices, cfg.seed)?
    };
    w.write("overlaps.csv", &rep.to_csv())?;
    let null: Vec<&str> = rep
        .entries
        .iter()
        .filter(|e| e.is_null(2.0))
        .map(|e| e.string.as_str())
        .collect();
    let significant = rep
        .entries
        .iter()
        .filter(|e| e.abs_mean >= NULL_OVERLAP_TOL && e.z_score() > 5.0)
        .count();
    let min = rep
        .entries
        .iter()
        .min_by(|a, b| a.abs_mean.total_cmp(&b.abs_mean))
        .expect("at least one string");
    let text = format!(
        "surjectivity-scan: N = {}, {} parameters, {} samples, {}\nsmallest mean overlap {} = {:.3e} (stderr {:.1e})\n{} strings consistent with zero (2 SE), {significant} above 5 SE\n",
        rep.num_qubits,
        rep.num_params,
        rep.samples,
        rep.distribution,
        min.string,
        min.abs_mean,
        min.stderr,
        null.len()
    );
    let summary = json!({
        "experiment": "surjectivity-scan",
        "num_qubits": rep.num_qubits,
        "num_params": rep.num_params,
        "samples": rep.samples,
        "distribution": rep.distribution,
        "min_string": min.string,
        "min_abs_mean": min.abs_mean,
        "null_strings": null,
        "significant": significant,
    });
    w.finish(summary, text)
}

fn magnus_table(cfg: &ExperimentConfig, mut w: Writer) -> Result<Artifacts, CliError> {
    let spec = cfg.ansatz_block()?.build()?;
    let m = cfg.magnus_block()?;
    let mode = m.mode.unwrap_or(SeriesMode::Exact);
    let exp = expand(&SymbolicHamiltonian::from_spec(&spec), m.l_max, mode)?;
    let mut rng = trial_rng(cfg.seed, 0);
    let theta = random_init(&spec, &mut rng, 0.0, 1.0);
    let resolver = Resolver::from_spec(&spec, &theta)?;
    w.write("terms.csv", &exp.to_csv(&resolver)?)?;
    let orders = exp.evaluate_by_order(&resolver)?;
    let mut coeffs = String::from("operator,order,value_re,value_im\n");
    let mut per_order = vec![];
    for (l, h) in orders.iter().enumerate() {
        let mut rows: Vec<(String, f64, f64)> =
            h.iter().map(|(p, c)| (p.to_string(), c.re, c.im)).collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        per_order.push(json!({
            "order": l,
            "terms": exp.terms.iter().filter(|t| t.order == l).count(),
            "operators": rows.len(),
        }));
        for (p, re, im) in rows {
            coeffs.push_str(&format!("{p},{l},{re:e},{im:e}\n"));
        }
    }
    w.write("coefficients.csv", &coeffs)?;
    w.write(
        "theta.csv",
        &theta
            .values
            .iter()
            .enumerate()
            .fold(String::from("index,value\n"), |s, (i, v)| {
                s + &format!("{i},{v:e}\n")
            }),
    )?;
    let ops = exp.operators().len();
    let mut text = format!(
        "magnus-table: N = {}, l_max = {}, {mode:?} series, {} symbolic terms over {ops} operators\n",
        spec.num_qubits,
        m.l_max,
        exp.terms.len()
    );
    for (l, h) in orders.iter().enumerate() {
        text.push_str(&format!(
            "order {l}: {} operators with nonzero value\n",
            h.iter().count()
        ));
    }
    let summary = json!({
        "experiment": "magnus-table",
        "num_qubits": spec.num_qubits,
        "l_max": m.l_max,
        "mode": mode,
        "terms": exp.terms.len(),
        "operators": ops,
        "orders": per_order,
    });
    w.finish(summary, text)
}

fn svd_analysis(cfg: &ExperimentConfig, mut w: Writer) -> Result<Artifacts, CliError> {
    let s = cfg.svd_block()?;
    let mode = s.mode.unwrap_or(SeriesMode::Exact);
    let l_max = s.l_max.unwrap_or(2);
    let rows: Vec<SvdRow> = svd_sweep(
        s.num_qubits,
        &s.kinds,
        &s.sizes,
        s.total_time,
        mode,
        s.samples,
        cfg.seed,
    )?;
    let max_len = rows
        .iter()
        .map(|r| r.singular_values.len())
        .max()
        .unwrap_or(0);
    let mut csv = SvdRow::csv_header(max_len);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_line(max_len));
        csv.push('\n');
    }
    w.write("svd.csv", &csv)?;
    let mut text = format!(
        "svd-analysis: N = {}, l_max = {l_max}, {mode:?} series\n",
        s.num_qubits
    );
    let mut table = vec![];
    for r in &rows {
        text.push_str(&format!(
            "{:?} K = {}: rank {} of {} coefficients, min sigma ratio {:.2e}\n",
            r.kind,
            r.k,
            r.rank,
            r.num_coefficients(),
            r.min_ratio()
        ));
        table.push(json!({
            "kind": r.kind,
            "k": r.k,
            "rank": r.rank,
            "num_coefficients": r.num_coefficients(),
            "full_rank": r.full_rank(),
        }));
    }
    let summary = json!({
        "experiment": "svd-analysis",
        "num_qubits": s.num_qubits,
        "l_max": l_max,
        "mode": mode,
        "rows": table,
    });
    w.finish(summary, text)
}

fn jw_fidelity(cfg: &ExperimentConfig, mut w: Writer) -> Result<Artifacts, CliError> {
    let a = cfg.ansatz_block()?;
    let j = cfg.jw_block()?;
    let opt = cfg.optimizer()?;
    let eval = j.eval_slices.unwrap_or(400);
    let mut csv = String::from("total_time,mean_fidelity,best_fidelity,identity_fidelity\n");
    let mut per_trial = String::from("total_time,trial,final_loss,fidelity\n");
    let mut text = format!(
        "jw-fidelity: {} on {} qubits, {} trials per time\n",
        j.pattern,
        a.num_qubits,
        cfg.trials()
    );
    let mut rows = vec![];
    for &t in &j.times {
        let spec = a.build_at(t)?;
        let target = target_jw(&j.pattern, t)?;
        let records = train_ensemble(&spec, &target.w, &opt, cfg.trials(), cfg.seed)?;
        let mut fids = vec![];
        for (i, r) in records.iter().enumerate() {
            let u = propagate(&spec, &ParameterVector::new(r.final_theta.clone()), eval)?.u;
            let f = avg_channel_fidelity(&u, &target.w)?;
            per_trial.push_str(&format!("{t},{i},{:e},{f:e}\n", r.final_loss));
            fids.push(f);
        }
        let (mean, _, best) = stats(&fids);
        let idle = avg_channel_fidelity(&identity(1 << a.num_qubits), &target.w)?;
        csv.push_str(&format!("{t},{mean:e},{best:e},{idle:e}\n"));
        text.push_str(&format!(
            "T = {t}: mean F {mean:.5}, best {best:.5}, identity channel {idle:.5}\n"
        ));
        rows.push(json!({
            "total_time": t,
            "mean_fidelity": mean,
            "best_fidelity": best,
            "identity_fidelity": idle,
        }));
    }
    w.write("fidelity.csv", &csv)?;
    w.write("trials.csv", &per_trial)?;
    let note = scale_note(cfg.trials(), opt.epochs);
    text.push_str(&note);
    text.push('\n');
    let summary = json!({
        "experiment": "jw-fidelity",
        "pattern": j.pattern,
        "num_qubits": a.num_qubits,
        "rows": rows,
        "scale_note": note,
    });
    w.finish(summary, text)
}

fn squeezing(cfg: &ExperimentConfig, mut w: Writer) -> Result<Artifacts, CliError> {
    let s = cfg.squeezing_block()?;
    let r = squeezing_check(
        s.num_qubits,
        s.coupling,
        s.total_time,
        s.slices.unwrap_or(4000),
    )?;
    let json = serde_json::to_string_pretty(&r).expect("report serializes");
    w.write("squeezing.json", &(json + "\n"))?;
    let text = format!(
        "squeezing-check: N = {}, J = {}, T = {}\nfield amplitude {:.4} cancels Z_i Z_N (residual {:.1e})\nZZX coefficient {:.4e} (closed form x4: {:.4e})\ndistance to the squeezing generator {:.3e}, to the full order <= 2 generator {:.3e}\n",
        r.num_qubits,
        r.coupling,
        r.total_time,
        r.lambda,
        r.alpha_zz,
        r.alpha_zzx_engine,
        4.0 * r.alpha_zzx,
        r.distance,
        r.distance_truncated
    );
    let summary = json!({
        "experiment": "squeezing-check",
        "num_qubits": r.num_qubits,
        "lambda": r.lambda,
        "alpha_zzx_engine": r.alpha_zzx_engine,
        "distance": r.distance,
        "distance_truncated": r.distance_truncated,
    });
    w.finish(summary, text)
}

fn a2_construction(cfg: &ExperimentConfig, mut w: Writer) -> Result<Artifacts, CliError> {
    let a = cfg.a2_block()?;
    let d = A2Options::default();
    let opts = A2Options {
        total_time: a.total_time.unwrap_or(d.total_time),
        field: a.field.unwrap_or(d.field),
        k: a.k,
        strong_drive: a.strong_drive.unwrap_or(d.strong_drive),
    };
    let s = construct_a2_qp_schedule(a.num_qubits, a.n_trotter, &opts)?;
    let u = propagate(&s.spec, &s.theta, a.slices.unwrap_or(2000))?.u;
    let target = target_ising(a.num_qubits, opts.field, opts.total_time)?;
    let loss = loss_e(&u, &target.w, true)?;
    let k = s.spec.controls[0].basis.size;
    w.write(
        "theta.csv",
        &s.theta
            .values
            .iter()
            .enumerate()
            .fold(String::from("index,value\n"), |acc, (i, v)| {
                acc + &format!("{i},{v:e}\n")
            }),
    )?;
    let text = format!(
        "a2-construction: N = {}, {} Trotter steps, K = {k}, {} parameters\nloss against the Ising target (h = {}, T = {}): {loss:.3e}\n",
        a.num_qubits,
        s.n_trotter,
        s.spec.num_params(),
        opts.field,
        opts.total_time
    );
    let summary = json!({
        "experiment": "a2-construction",
        "num_qubits": a.num_qubits,
        "n_trotter": s.n_trotter,
        "k": k,
        "num_params": s.spec.num_params(),
        "field": opts.field,
        "total_time": opts.total_time,
        "strong_drive": s.strong_drive,
        "loss": loss,
    });
    w.finish(summary, text)
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

fn gamma_theory(cfg: &ExperimentConfig, mut w: Writer) -> Result<Artifacts, CliError> {
    let n_q = cfg.gamma_block()?.num_qubits;
    let d = 1usize << n_q;
    // brute-force critical losses where the enumeration is small enough
    let flips = if n_q <= PERMUTATION_QUBIT_CAP {
        Some(sign_flip_critical_losses(&identity(d))?)
    } else {
        None
    };
    let mut csv = String::from(
        "n,loss,degeneracy,brute_force_count,rank,signature,rank_formula,printed_rank,signature_formula,classification\n",
    );
    let mut text = format!("gamma-theory: N = {n_q}, d = {d}\n");
    let mut rows = vec![];
    for n in 0..=d {
        let g = gamma_spectrum(n_q, n)?;
        let loss = 4.0 * n as f64;
        let deg = binomial(d, n);
        let count = flips.as_ref().map(|f| {
            f.iter()
                .find(|(l, _)| (l - loss).abs() < 1e-6)
                .map_or(0, |(_, c)| *c)
        });
        let class = class_name(g.classification());
        csv.push_str(&format!(
            "{n},{loss},{deg},{},{},{},{},{},{},{class}\n",
            count.map_or(String::new(), |c| c.to_string()),
            g.rank,
            g.signature,
            g.rank_formula,
            g.printed_rank,
            g.signature_formula
        ));
        text.push_str(&format!(
            "n = {n}: loss {loss}, degeneracy {deg}, rank {} (closed form {}, printed {}), signature {} ({class})\n",
            g.rank, g.rank_formula, g.printed_rank, g.signature
        ));
        rows.push(json!({
            "n": n,
            "loss": loss,
            "degeneracy": deg,
            "brute_force_count": count,
            "rank": g.rank,
            "signature": g.signature,
            "rank_formula": g.rank_formula,
            "printed_rank": g.printed_rank,
        }));
    }
    w.write("gamma.csv", &csv)?;
    let summary = json!({
        "experiment": "gamma-theory",
        "num_qubits": n_q,
        "rows": rows,
    });
    w.finish(summary, text)
}

fn haar(cfg: &ExperimentConfig, mut w: Writer) -> Result<Artifacts, CliError> {
    let h = cfg.haar_block()?;
    let n = h.num_qubits;
    let p = pauli_arg("haar.p", &h.p, n)?;
    let hh = pauli_arg("haar.h", &h.h, n)?;
    let m = pauli_arg("haar.m", &h.m, n)?.to_dense(Convention::FullPauli)?;
    let r = haar_checks(n, h.samples, &p, &hh, &m, cfg.seed)?;
    let json = serde_json::to_string_pretty(&r).expect("report serializes");
    w.write("haar.json", &(json + "\n"))?;
    let text = format!(
        "haar-check: N = {n}, {} samples\nTr(P U1 U2^dag h U2): |mean| {:.3e}, stderr {:.3e}, within 3 SE: {}\nTr(U M): |mean| {:.3e}, stderr {:.3e}, within 3 SE: {}\n",
        r.samples,
        r.lemma1.abs_mean,
        r.lemma1.stderr,
        r.lemma1.within(3.0),
        r.lemma2.abs_mean,
        r.lemma2.stderr,
        r.lemma2.within(3.0)
    );
    let summary = json!({
        "experiment": "haar-check",
        "num_qubits": n,
        "samples": r.samples,
        "lemma1_within_3se": r.lemma1.within(3.0),
        "lemma2_within_3se": r.lemma2.within(3.0),
    });
    w.finish(summary, text)
}
