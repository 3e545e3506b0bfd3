//! One function per subcommand. Each prints a short table and writes CSV
//! outputs into the run directory.

use anyhow::{bail, Result};
use oofdm_rcn::allocator::{allocate, AllocationResult, AllocationSettings};
use oofdm_rcn::channel::ChannelProfile;
use oofdm_rcn::experiment::{
    measure_rcn_power, measure_transmit_power, rcn_statistics, simulate_ser, ExperimentConfig,
};
use oofdm_rcn::modems::{power_relations, Scheme};
use oofdm_rcn::multilayer::SchemeConfig;
use oofdm_rcn::numerics::normal_cdf;
use oofdm_rcn::rcn_model::total_noise_worst;
use oofdm_rcn::ser_theory::{evaluate_ser, Mode};
use serde::Serialize;

use crate::output::{num, OutputDir};
use crate::settings::Settings;

fn channel(s: &Settings) -> Result<ChannelProfile> {
    s.channel.build(s.n, s.noise_power)
}

fn experiment(s: &Settings, scheme: Scheme, channel: &ChannelProfile) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(scheme, s.order)?;
    cfg.n = s.n;
    cfg.layers = s.layers_for(scheme);
    cfg.snr_db = s.snr_db.clone();
    cfg.snr_kind = s.snr_kind;
    cfg.runs = s.runs;
    cfg.seed = s.seed;
    cfg.rims = s.rims;
    cfg.channel = channel.clone();
    cfg.validate()?;
    Ok(cfg)
}

pub fn power_relations_cmd(s: &Settings, out: &mut OutputDir) -> Result<()> {
    let mut rows = Vec::new();
    println!("{:<6} {:>6} {:>10} {:>10} {:>10} {:>10} {:>8} {:>8}", "scheme", "layers", "P_elec", "P_opt", "mc_elec", "mc_opt", "err_el%", "err_op%");
    for (i, &scheme) in s.schemes.iter().enumerate() {
        let layers = s.layers_for(scheme);
        let closed = power_relations(scheme, s.p_eff, layers)?;
        let mut row = vec![scheme.to_string(), layers.to_string(), num(s.p_eff), num(closed.elec), num(closed.opt)];
        if s.validate_frames > 0 {
            let cfg = SchemeConfig::uniform(scheme, s.n, layers, s.order, s.p_eff)?;
            let (elec, opt) = measure_transmit_power(&cfg, s.validate_frames, s.seed, i)?;
            let (ee, eo) = ((elec - closed.elec).abs() / closed.elec, (opt - closed.opt).abs() / closed.opt);
            println!(
                "{:<6} {:>6} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>8.3} {:>8.3}",
                scheme, layers, closed.elec, closed.opt, elec, opt, 100.0 * ee, 100.0 * eo
            );
            row.extend([num(elec), num(opt), num(ee), num(eo)]);
        } else {
            println!("{:<6} {:>6} {:>10.5} {:>10.5}", scheme, layers, closed.elec, closed.opt);
            row.extend(["".into(), "".into(), "".into(), "".into()]);
        }
        rows.push(row);
    }
    out.csv(
        "power_relations.csv",
        &["scheme", "layers", "p_eff", "p_elec", "p_opt", "mc_p_elec", "mc_p_opt", "rel_err_elec", "rel_err_opt"],
        &rows,
    )
}

pub fn rcn_power_cmd(s: &Settings, out: &mut OutputDir) -> Result<()> {
    let ch = channel(s)?;
    let mut rows = Vec::new();
    for &scheme in &s.schemes {
        let cfg = experiment(s, scheme, &ch)?;
        for &snr in &s.snr_db {
            let scheme_cfg = cfg.scheme_config(snr)?;
            let estimates = (1..=3u8)
                .map(|r| total_noise_worst(&scheme_cfg, &ch.noise_map(), r))
                .collect::<oofdm_rcn::Result<Vec<_>>>()?;
            let measured = measure_rcn_power(&cfg, snr)?;
            for m in &measured.layers {
                let t = m.layer;
                println!(
                    "{scheme} {snr:>5} dB layer {t}: measured {:.4} estimated {:.4}",
                    m.rcn_power,
                    estimates[s.rims as usize - 1].time_domain_rcn(t)
                );
                rows.push(vec![
                    scheme.to_string(),
                    num(snr),
                    t.to_string(),
                    num(m.rcn_power),
                    num(m.rcn_std_err),
                    num(estimates[0].time_domain_rcn(t)),
                    num(estimates[1].time_domain_rcn(t)),
                    num(estimates[2].time_domain_rcn(t)),
                    num(m.worst_case_time_domain),
                    num(m.error_power / 4.0),
                    m.bound_violations.to_string(),
                ]);
            }
        }
    }
    out.csv(
        "rcn_power.csv",
        &[
            "scheme",
            "snr_db",
            "layer",
            "measured",
            "measured_std_err",
            "estimated_1rim",
            "estimated_2rim",
            "estimated_3rim",
            "estimated_measured_noise",
            "error_power_quarter",
            "bound_violations",
        ],
        &rows,
    )
}

pub fn ser_cmd(s: &Settings, out: &mut OutputDir) -> Result<()> {
    let ch = channel(s)?;
    let noise = ch.noise_map();
    let mut rows = Vec::new();
    for (si, &scheme) in s.schemes.iter().enumerate() {
        let cfg = experiment(s, scheme, &ch)?;
        for (p, &snr) in s.snr_db.iter().enumerate() {
            let scheme_cfg = cfg.scheme_config(snr)?;
            let sim = simulate_ser(&scheme_cfg, &ch, s.runs, s.seed, si * s.snr_db.len() + p)?;
            let aware = evaluate_ser(&scheme_cfg, &noise, Mode::RcnAware, s.rims)?;
            let unaware = evaluate_ser(&scheme_cfg, &noise, Mode::RcnUnaware, s.rims)?;
            println!(
                "{scheme} {snr:>5} dB: simulated {:.4e} (se {:.1e}) aware {:.4e} unaware {:.4e}",
                sim.ser, sim.std_err, aware.overall, unaware.overall
            );
            rows.push(vec![
                scheme.to_string(),
                num(snr),
                num(sim.ser),
                num(sim.std_err),
                num(aware.overall),
                num(unaware.overall),
                aware.approximate.to_string(),
            ]);
        }
    }
    out.csv("ser.csv", &["scheme", "snr_db", "simulated", "std_err", "rcn_aware", "rcn_unaware", "approximate"], &rows)
}

pub fn rcn_stats_cmd(s: &Settings, out: &mut OutputDir) -> Result<()> {
    let ch = channel(s)?;
    let (mut cdf, mut cov, mut summary) = (Vec::new(), Vec::new(), Vec::new());
    for &scheme in &s.schemes {
        let cfg = experiment(s, scheme, &ch)?;
        for &snr in &s.snr_db {
            let stats = rcn_statistics(&cfg, snr, s.bin)?;
            for layer in &stats.layers {
                println!(
                    "{scheme} {snr:>5} dB bin {} layer {}: KS re {:.4} im {:.4}",
                    s.bin, layer.layer, layer.ks_real, layer.ks_imag
                );
                summary.push(vec![
                    scheme.to_string(),
                    num(snr),
                    layer.layer.to_string(),
                    layer.set_size.to_string(),
                    num(layer.rcn_power),
                    num(layer.ks_real),
                    num(layer.ks_imag),
                ]);
                for (part, values) in [("real", &layer.real), ("imag", &layer.imag)] {
                    let mut sorted = values.clone();
                    sorted.sort_by(f64::total_cmp);
                    let n = sorted.len() as f64;
                    for (i, v) in sorted.iter().enumerate() {
                        cdf.push(vec![
                            scheme.to_string(),
                            num(snr),
                            layer.layer.to_string(),
                            part.to_string(),
                            num(*v),
                            num((i + 1) as f64 / n),
                            num(normal_cdf(*v)),
                        ]);
                    }
                }
            }
            for (a, row) in stats.rho.iter().enumerate() {
                for (b, rho) in row.iter().enumerate() {
                    cov.push(vec![
                        scheme.to_string(),
                        num(snr),
                        stats.layers[a].layer.to_string(),
                        stats.layers[b].layer.to_string(),
                        num(*rho),
                    ]);
                }
            }
        }
    }
    out.csv("rcn_cdf.csv", &["scheme", "snr_db", "layer", "part", "value", "empirical_cdf", "normal_cdf"], &cdf)?;
    out.csv("rcn_covariance.csv", &["scheme", "snr_db", "layer_a", "layer_b", "abs_rho"], &cov)?;
    out.csv("rcn_stats.csv", &["scheme", "snr_db", "layer", "set_size", "rcn_power", "ks_real", "ks_imag"], &summary)
}

#[derive(Serialize)]
struct AllocationSummary {
    mode: Mode,
    snr_db: f64,
    iterations: usize,
    converged: bool,
    limit_cycle: bool,
    total_bits: u64,
    average_bits: f64,
    iteration_bits: Vec<u64>,
    predicted_ser: f64,
    simulated_ser: Option<f64>,
    simulated_std_err: Option<f64>,
}

pub fn allocate_cmd(s: &Settings, out: &mut OutputDir) -> Result<()> {
    if s.schemes != [Scheme::Laco] {
        bail!("allocation is implemented for LACO only");
    }
    let ch = channel(s)?;
    let noise = ch.noise_map();
    let (mut loads, mut rows, mut summaries) = (Vec::new(), Vec::new(), Vec::new());
    for (p, &snr) in s.snr_db.iter().enumerate() {
        let p_eff = experiment(s, Scheme::Laco, &ch)?.effective_power(snr)?;
        for (mi, mode) in [Mode::RcnAware, Mode::RcnUnaware].into_iter().enumerate() {
            let settings = AllocationSettings {
                target_ser: s.target_ser,
                mode,
                rims: s.rims,
                max_bits: s.max_bits,
                max_iters: s.max_iters,
                tolerance: s.tolerance,
            };
            let r = allocate(&ch, p_eff, &settings)?;
            let (predicted, simulated) = if r.total_bits() == 0 {
                (0.0, None)
            } else {
                let cfg = r.to_scheme_config()?;
                let predicted = evaluate_ser(&cfg, &noise, Mode::RcnAware, s.rims)?.overall;
                let sim = if s.closed_loop { Some(simulate_ser(&cfg, &ch, s.runs, s.seed, 2 * p + mi)?) } else { None };
                (predicted, sim)
            };
            println!(
                "{mode} {snr:>5} dB: {:.3} bits/subcarrier, {} iterations{}, predicted SER {:.3e}{}",
                r.average_bits(),
                r.iterations,
                if r.converged { "" } else if r.limit_cycle { " (limit cycle)" } else { " (not converged)" },
                predicted,
                simulated.as_ref().map(|e| format!(", simulated {:.3e}", e.ser)).unwrap_or_default()
            );
            append_loads(&mut loads, mode, snr, &r);
            rows.push(vec![
                mode.to_string(),
                num(snr),
                r.iterations.to_string(),
                r.converged.to_string(),
                r.limit_cycle.to_string(),
                r.total_bits().to_string(),
                num(r.average_bits()),
                num(predicted),
                simulated.as_ref().map(|e| num(e.ser)).unwrap_or_default(),
                simulated.as_ref().map(|e| num(e.std_err)).unwrap_or_default(),
            ]);
            summaries.push(AllocationSummary {
                mode,
                snr_db: snr,
                iterations: r.iterations,
                converged: r.converged,
                limit_cycle: r.limit_cycle,
                total_bits: r.total_bits(),
                average_bits: r.average_bits(),
                iteration_bits: r.history.iter().map(|h| h.total_bits).collect(),
                predicted_ser: predicted,
                simulated_ser: simulated.as_ref().map(|e| e.ser),
                simulated_std_err: simulated.as_ref().map(|e| e.std_err),
            });
        }
    }
    out.csv("allocation.csv", &["mode", "snr_db", "k", "layer", "bits", "power", "noise"], &loads)?;
    out.csv(
        "allocation_summary.csv",
        &[
            "mode",
            "snr_db",
            "iterations",
            "converged",
            "limit_cycle",
            "total_bits",
            "average_bits",
            "predicted_ser",
            "simulated_ser",
            "simulated_std_err",
        ],
        &rows,
    )?;
    out.json("allocation_summary.json", &summaries)
}

fn append_loads(rows: &mut Vec<Vec<String>>, mode: Mode, snr: f64, r: &AllocationResult) {
    for k in 1..r.bits.len() {
        rows.push(vec![
            mode.to_string(),
            num(snr),
            k.to_string(),
            (k.trailing_zeros() + 1).to_string(),
            r.bits[k].to_string(),
            num(r.powers[k]),
            num(r.noise[k]),
        ]);
    }
}
