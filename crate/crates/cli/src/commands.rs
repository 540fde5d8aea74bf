use std::path::Path;

use lipconj_core::gap_example::{run_gap_pipeline, tent_preimage_growth};
use lipconj_core::markov_chain::{
    build_transition, convolution_identity_check, entropy_estimates, path_counts, scaled_log_counts, taboo_counts,
    CountMode, MarkovMap,
};
use lipconj_core::markov_conjugator::{build_conjugate, identity_checks, interval_masses, windowed_conjugate};
use lipconj_core::pwl_map::{
    check_conjugacy, power_example, preimage_count, preimages, variation_growth, IterVariation, Window,
};
use lipconj_core::rational::{self, fmt_q};
use lipconj_core::subeigen::{
    banded_perron, pruitt_construct_with, pruitt_lower_bound_check, scalar_band_coefficients, summability,
    verify_subeigenvector, PruittOptions,
};
use lipconj_core::variation_conjugator::{variation_conjugacy_with, PhiOptions};
use lipconj_core::{MarkovSystem, PwlMap, Q, State, SubeigenVector, TransitionStructure};
use num_traits::{One, Zero};
use serde_json::json;

use crate::io::{cell_window, emit_json, rational, rational_list, read_json, write_csv, write_json, CliError, CliResult, NamedMap};
use crate::{ChainCommand, ChainInput, CheckCommand, Command, ExampleCommand, MapCommand};

/// Iterates checked by `Var g^n ≤ Lip(g)^n` after every construction.
const LIPSCHITZ_POWER_DEPTH: usize = 6;

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Map(c) => map(c),
        Command::Chain(c) => chain(c),
        Command::Check(c) => check(c),
        Command::Example(c) => example(c),
    }
}

fn fail_unless(ok: bool, what: impl FnOnce() -> String) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Failed(what()))
    }
}

/// First `n ≤ depth` with `Var g^n > Lip(g)^n`, if any.
fn lipschitz_power_failure(g: &PwlMap, depth: usize) -> Option<usize> {
    let lip = g.lipschitz_constant();
    let mut iv = IterVariation::new(g);
    let mut bound = Q::one();
    for n in 1..=depth {
        bound *= &lip;
        if iv.total(n) > bound {
            return Some(n);
        }
    }
    None
}

fn interval_map(path: &Path) -> CliResult<PwlMap> {
    match read_json::<MarkovMap>(path)? {
        MarkovMap::Interval(f) => Ok(f),
        MarkovMap::Lift(_) => Err(CliError::Input(format!("{}: expected an interval map", path.display()))),
    }
}

fn map(command: MapCommand) -> CliResult<()> {
    match command {
        MapCommand::Var { input, n, sidecar } => {
            let f = interval_map(&input)?;
            let rows = variation_growth(&f, n)?;
            write_csv(
                sidecar.csv.as_deref(),
                &["n", "var", "root"],
                rows.iter().map(|r| vec![r.n.to_string(), fmt_q(&r.var), r.root.to_string()]),
            )?;
            emit_json(&json!({ "rows": rows }))
        }
        MapCommand::Lip { input } => {
            let (lip, pieces) = match read_json::<MarkovMap>(&input)? {
                MarkovMap::Interval(f) => (f.lipschitz_constant(), f.num_pieces()),
                MarkovMap::Lift(l) => (l.lipschitz_constant(), l.segments_per_cell()),
            };
            emit_json(&json!({ "lip": fmt_q(&lip), "lip_float": rational::to_f64(&lip), "pieces": pieces }))
        }
        MapCommand::Preimages {
            input,
            x,
            n,
            window,
            list,
            cap,
        } => {
            let x = rational(&x)?;
            let window = match window {
                Some(w) => {
                    let ends = rational_list(&w)?;
                    let [lo, hi] = <[Q; 2]>::try_from(ends)
                        .map_err(|_| CliError::Input("window must be lo,hi".into()))?;
                    Some(Window::new(lo, hi)?)
                }
                None => None,
            };
            let map = read_json::<MarkovMap>(&input)?;
            // listing is capped, so count from the list when one is requested
            let (count, points) = match (&map, list) {
                (MarkovMap::Interval(f), true) => {
                    let ps = preimages(f, &x, n, window.as_ref(), cap)?;
                    (ps.len() as u128, Some(ps))
                }
                (MarkovMap::Lift(l), true) => {
                    let ps = preimages(l, &x, n, window.as_ref(), cap)?;
                    (ps.len() as u128, Some(ps))
                }
                (MarkovMap::Interval(f), false) => (preimage_count(f, &x, n, window.as_ref())?, None),
                (MarkovMap::Lift(l), false) => (preimage_count(l, &x, n, window.as_ref())?, None),
            };
            let points: Option<Vec<String>> = points.map(|ps| ps.iter().map(fmt_q).collect());
            emit_json(&json!({ "x": fmt_q(&x), "n": n, "count": count.to_string(), "points": points }))
        }
        MapCommand::ConjugateVariation {
            input,
            nu,
            epsilon,
            n,
            table_depth,
            table_cap,
            g_out,
            sidecar,
        } => {
            let f = interval_map(&input)?;
            let (nu, epsilon) = (rational(&nu)?, rational(&epsilon)?);
            let opts = PhiOptions {
                table_depth,
                table_cap,
                ..PhiOptions::default()
            };
            let res = variation_conjugacy_with(&f, &nu, &epsilon, n, &opts)?;
            let bound = &nu + &epsilon;
            let power_failure = lipschitz_power_failure(&res.g, LIPSCHITZ_POWER_DEPTH);
            if let Some(path) = g_out {
                write_json(&path, &res.g)?;
            }
            write_csv(
                sidecar.csv.as_deref(),
                &["x", "phi"],
                res.phi.pairs().map(|(x, y)| vec![fmt_q(x), fmt_q(y)]),
            )?;
            let within = res.lip_g <= bound;
            emit_json(&json!({
                "result": res,
                "bound": fmt_q(&bound),
                "within_bound": within,
                "lipschitz_power_failure": power_failure,
            }))?;
            fail_unless(!res.certified || within, || format!("Lip(g) = {} exceeds {}", res.lip_g, bound))?;
            fail_unless(power_failure.is_none(), || format!("Var g^n > Lip(g)^n at n = {power_failure:?}"))
        }
    }
}

fn load_chain(chain: &ChainInput) -> CliResult<(TransitionStructure, State)> {
    let ts: TransitionStructure = read_json(&chain.input)?;
    let a = ts.parse_state(&chain.anchor)?;
    Ok((ts, a))
}

fn chain(command: ChainCommand) -> CliResult<()> {
    match command {
        ChainCommand::Counts {
            chain,
            to,
            n,
            mode,
            sidecar,
        } => {
            let (ts, a) = load_chain(&chain)?;
            let b = match to {
                Some(t) => ts.parse_state(&t)?,
                None => a,
            };
            match mode {
                CountMode::Exact => {
                    let t = path_counts(&ts, &a, &b, n)?;
                    write_csv(
                        sidecar.csv.as_deref(),
                        &["n", "p_ab", "p_a_dot", "p_dot_b"],
                        (0..=n).map(|k| {
                            vec![
                                k.to_string(),
                                t.p_ab[k].to_string(),
                                t.p_a_dot[k].to_string(),
                                t.p_dot_b[k].to_string(),
                            ]
                        }),
                    )?;
                    emit_json(&t)
                }
                CountMode::Scaled => {
                    let t = scaled_log_counts(&ts, &a, &b, n)?;
                    write_csv(
                        sidecar.csv.as_deref(),
                        &["n", "log_p_ab", "log_p_a_dot", "log_p_dot_b"],
                        (0..=n).map(|k| {
                            vec![
                                k.to_string(),
                                t.log_p_ab[k].to_string(),
                                t.log_p_a_dot[k].to_string(),
                                t.log_p_dot_b[k].to_string(),
                            ]
                        }),
                    )?;
                    emit_json(&json!({ "from": ts.label(&a), "to": ts.label(&b), "counts": t }))
                }
            }
        }
        ChainCommand::Entropy {
            chain,
            n,
            estimator,
            mode,
            sidecar,
        } => {
            let (ts, a) = load_chain(&chain)?;
            let e = entropy_estimates(&ts, &a, n, estimator, mode)?;
            write_csv(
                sidecar.csv.as_deref(),
                &["n", "gurevich", "salama", "revsalama"],
                (0..e.gurevich.len()).map(|k| {
                    vec![
                        (k + 1).to_string(),
                        e.gurevich[k].to_string(),
                        e.salama[k].to_string(),
                        e.revsalama[k].to_string(),
                    ]
                }),
            )?;
            emit_json(&e)
        }
        ChainCommand::Taboo { chain, n, sidecar } => {
            let (ts, a) = load_chain(&chain)?;
            let t = taboo_counts(&ts, &a, n)?;
            let conv = convolution_identity_check(&ts, &a, n)?;
            write_csv(
                sidecar.csv.as_deref(),
                &["n", "first_entrance", "first_return"],
                (0..=n).map(|k| vec![k.to_string(), t.first_entrance[k].to_string(), t.first_return[k].to_string()]),
            )?;
            emit_json(&json!({ "taboo": t, "convolution": conv }))?;
            fail_unless(conv.ok, || format!("convolution identity fails at n = {:?}", conv.first_failure))
        }
        ChainCommand::Subeig {
            chain,
            lambda,
            n,
            window,
            tol,
            divergence_tol,
            perron,
            sidecar,
        } => subeig(&chain, &lambda, n, window, &tol, divergence_tol, perron, sidecar.csv.as_deref()),
        ChainCommand::Conjugate {
            input,
            lambda,
            v,
            vector,
            anchor,
            series_depth,
            depth,
            delta,
            center,
            cap,
            sidecar,
        } => {
            let ms: MarkovSystem = read_json(&input)?;
            let ts = build_transition(&ms)?;
            let lambda = rational(&lambda)?;
            let v = match (v, vector) {
                (Some(list), _) => SubeigenVector::from_finite(lambda.clone(), rational_list(&list)?)?,
                (None, Some(path)) => read_json(&path)?,
                (None, None) => {
                    let a = ts.parse_state(&anchor)?;
                    pruitt_construct_with(&ts, &a, &lambda, series_depth, PruittOptions::default())?
                }
            };
            if ms.is_lift() {
                let w = windowed_conjugate(&ms, &v, center, delta)?;
                write_csv(
                    sidecar.csv.as_deref(),
                    &["x", "psi"],
                    w.psi.iter().map(|(x, y)| vec![x.to_string(), y.to_string()]),
                )?;
                return emit_json(&w);
            }
            let verify = verify_subeigenvector(&ts, &v, &lambda, None, &Q::zero())?;
            let conj = build_conjugate(&ms, &v, depth, cap)?;
            let identities = identity_checks(&ms, &v, depth)?;
            let masses = interval_masses(&ms, &conj.psi)?;
            let total: Q = v.entries.values().sum();
            let round_trip = v
                .entries
                .iter()
                .all(|(k, x)| masses.get(k).is_some_and(|m| *m == x / &total));
            let power_failure = lipschitz_power_failure(&conj.g, LIPSCHITZ_POWER_DEPTH);
            write_csv(
                sidecar.csv.as_deref(),
                &["x", "psi"],
                conj.psi.pairs().map(|(x, y)| vec![fmt_q(x), fmt_q(y)]),
            )?;
            emit_json(&json!({
                "conjugate": conj,
                "verify": verify,
                "identities": identities,
                "round_trip": round_trip,
                "lipschitz_power_failure": power_failure,
            }))?;
            fail_unless(verify.ok, || format!("v is not a {lambda}-subeigenvector"))?;
            fail_unless(identities.ok, || format!("identity check: {:?}", identities.first_failure))?;
            fail_unless(round_trip, || "interval masses do not reproduce v".into())?;
            fail_unless(power_failure.is_none(), || format!("Var g^n > Lip(g)^n at n = {power_failure:?}"))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn subeig(
    chain: &ChainInput,
    lambda: &str,
    n: usize,
    window: Option<String>,
    tol: &str,
    divergence_tol: f64,
    perron: bool,
    csv: Option<&Path>,
) -> CliResult<()> {
    let (ts, a) = load_chain(chain)?;
    let lambda = rational(lambda)?;
    let tol = rational(tol)?;
    let series = summability(&ts, &a, &lambda, n, divergence_tol)?;
    let perron = if perron {
        Some(banded_perron(&scalar_band_coefficients(&ts)?, Some(rational::to_f64(&lambda)), 1e-12)?)
    } else {
        None
    };
    if series.divergent {
        emit_json(&json!({ "summability": series, "perron": perron }))?;
        return Err(CliError::Failed(format!("series at lambda = {lambda} diverges")));
    }
    let v = pruitt_construct_with(&ts, &a, &lambda, n, PruittOptions { divergence_tol })?;
    let window = match window {
        Some(w) => Some(cell_window(&w)?),
        None if ts.is_finite() => None,
        None => {
            let r = (n / 6) as i64;
            Some((a.cell - r, a.cell + r))
        }
    };
    let verify = verify_subeigenvector(&ts, &v, &lambda, window, &tol)?;
    let lower = pruitt_lower_bound_check(&ts, &v, &a, &lambda, (n / 5).max(1), &tol)?;
    write_csv(
        csv,
        &["state", "value"],
        v.entries.iter().map(|(s, x)| vec![ts.label(s), rational::to_f64(x).to_string()]),
    )?;
    emit_json(&json!({
        "vector": v,
        "summability": series,
        "verify": verify,
        "lower_bound": lower,
        "perron": perron,
    }))?;
    fail_unless(verify.ok, || format!("subeigen inequality violated at {:?}", verify.violations))?;
    fail_unless(lower.ok, || format!("lower bound fails at {:?}", lower.failures))
}

fn check(command: CheckCommand) -> CliResult<()> {
    match command {
        CheckCommand::Conjugacy {
            f,
            g,
            psi,
            points,
            lo,
            hi,
            tol,
            nodes,
        } => {
            let (f, g, psi) = (NamedMap::resolve(&f)?, NamedMap::resolve(&g)?, NamedMap::resolve(&psi)?);
            let grid: Vec<Q> = if nodes {
                match &psi {
                    NamedMap::Table(t) => t.xs().to_vec(),
                    _ => return Err(CliError::Input("--nodes needs psi given as a table".into())),
                }
            } else {
                let (lo, hi) = (rational(&lo)?, rational(&hi)?);
                if points == 0 || lo >= hi {
                    return Err(CliError::Input("need points > 0 and lo < hi".into()));
                }
                let steps = Q::from_integer((points + 1).into());
                (1..=points)
                    .map(|k| &lo + (&hi - &lo) * Q::from_integer(k.into()) / &steps)
                    .collect()
            };
            let residual = check_conjugacy(f.as_real_map(), g.as_real_map(), psi.as_real_map(), &grid);
            let pass = residual < tol;
            emit_json(&json!({ "residual": residual, "points": grid.len(), "tolerance": tol, "pass": pass }))?;
            fail_unless(pass, || format!("residual {residual} ≥ {tol}"))
        }
    }
}

fn example(command: ExampleCommand) -> CliResult<()> {
    match command {
        ExampleCommand::Gap {
            n_counts,
            n_entropy,
            sidecar,
        } => {
            let r = run_gap_pipeline(n_counts, n_entropy)?;
            write_csv(
                sidecar.csv.as_deref(),
                &["n", "p00", "p_dot0", "ratio"],
                r.rows
                    .iter()
                    .map(|row| vec![row.n.to_string(), row.p00.clone(), row.p_dot0.clone(), row.ratio.to_string()]),
            )?;
            emit_json(&r)?;
            fail_unless(r.pass, || {
                let failed: Vec<_> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
                format!("gap checks failed: {failed:?}")
            })
        }
        ExampleCommand::Tent { n, x, tol, sidecar } => {
            let r = tent_preimage_growth(n, &rational_list(&x)?, tol)?;
            write_csv(
                sidecar.csv.as_deref(),
                &["x", "count", "growth"],
                r.rows
                    .iter()
                    .map(|row| vec![fmt_q(&row.x), row.count.to_string(), row.growth.to_string()]),
            )?;
            emit_json(&r)?;
            fail_unless(r.pass, || "preimage growth outside tolerance".into())
        }
        ExampleCommand::Power { t, points, tol } => {
            let r = power_example(t, points, tol)?;
            emit_json(&r)?;
            fail_unless(r.pass, || format!("residual {} ≥ {tol}", r.residual))
        }
    }
}
