use std::fmt::Write as _;
use std::path::Path;

use billiard_core::cells::inradius_curve;
use billiard_core::dynamics::{trace, PhasePoint, Word};
use billiard_core::enumeration::{check_counting_identity, enumerate, EnumerateOptions};
use billiard_core::geometry::{load_polygon, PolygonTable, ValidateOptions};
use billiard_core::metric::{
    estimate_ba, hamming_cover_curve, sampled_words, theorem_experiments, verify_prop9, FFunction,
};
use billiard_core::perturbation::{
    chain_creation_scan, exponent_fit, persistence_check, perturb as perturb_table, theta_margin, EventParent,
    PolygonFamily, ScanOptions,
};
use billiard_core::unfolding::{beam_feasible, detect_saddle_chains, unfold_word, Certificate, Unfolder};

use crate::error::CliError;
use crate::run::{f17, Run};
use crate::{MetricCommand, PerturbCommand, PolygonArg, StartArg};

fn load(run: &mut Run, p: &PolygonArg) -> Result<PolygonTable, CliError> {
    let (_, q) = load_polygon(&p.polygon, ValidateOptions { fix_orientation: p.fix_orientation })?;
    run.set_polygon(&q.canonical_string());
    Ok(q)
}

fn start_point(q: &PolygonTable, a: &StartArg) -> Result<PhasePoint, CliError> {
    let side = q
        .side_index(&a.side)
        .ok_or_else(|| CliError::Usage(format!("unknown side label {:?}; sides are {:?}", a.side, q.labels())))?;
    let z = PhasePoint::new(side, a.s, a.theta);
    if !z.is_valid(q) {
        return Err(CliError::Usage(format!(
            "phase point outside phase space: need 0 <= s <= {} and 0 < theta < pi",
            q.side_length(side)
        )));
    }
    Ok(z)
}

fn enum_opts(run: &Run, connections: bool) -> EnumerateOptions {
    EnumerateOptions { connections, horizon_blocks: 0, max_bits: Some(run.precision_bits()) }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn simulate(run: &mut Run, p: &PolygonArg, start: &StartArg, steps: usize, out: &Path) -> Result<(), CliError> {
    let q = load(run, p)?;
    let z = start_point(&q, start)?;
    let (t, failure) = match trace(&q, &z, steps) {
        Ok(t) => (t, None),
        Err(e) => {
            // Keep the steps taken before the orbit was lost.
            let done = e.step().unwrap_or(1).saturating_sub(1);
            (trace(&q, &z, done)?, Some(e))
        }
    };
    let mut rows = vec![vec!["0".into(), q.label(z.side).to_string(), f17(z.s), f17(z.theta), f17(0.0), f17(0.0)]];
    let mut time = 0.0;
    let mut points = t.points.iter().skip(1).chain(std::iter::once(&t.end));
    for (k, flight) in t.flights.iter().enumerate() {
        let pt = points.next().expect("one point per flight");
        time += flight;
        rows.push(vec![
            (k + 1).to_string(),
            q.label(pt.side).to_string(),
            f17(pt.s),
            f17(pt.theta),
            f17(*flight),
            f17(time),
        ]);
    }
    run.write_csv(out, &[], &["step", "side", "s", "theta", "flight", "cumulative_time"], &rows)?;
    match failure {
        Some(e) => Err(e.into()),
        None => {
            println!("{} steps, time {}", t.flights.len(), f17(time));
            Ok(())
        }
    }
}

fn line_hit(p: [f64; 2], d: [f64; 2], a: [f64; 2], b: [f64; 2]) -> Option<f64> {
    let e = [b[0] - a[0], b[1] - a[1]];
    let den = d[0] * e[1] - d[1] * e[0];
    if den == 0.0 {
        return None;
    }
    let w = [a[0] - p[0], a[1] - p[1]];
    Some((w[0] * e[1] - w[1] * e[0]) / den)
}

pub fn unfold(run: &mut Run, p: &PolygonArg, word: &str, svg: &Path) -> Result<(), CliError> {
    let q = load(run, p)?;
    let w = Word::parse(&q, word).ok_or_else(|| CliError::Usage(format!("cannot read word {word:?} over sides {:?}", q.labels())))?;
    let edges = unfold_word(&q, &w)?;
    let frames = Unfolder::new(&q).frames(&w)?;
    let copies: Vec<Vec<[f64; 2]>> = frames
        .iter()
        .map(|f| q.vertices().iter().map(|v| f.apply(v).to_f64()).collect())
        .collect();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for v in copies.iter().flatten() {
        for i in 0..2 {
            lo[i] = lo[i].min(v[i]);
            hi[i] = hi[i].max(v[i]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let (pad, sw) = (span * 0.05, span / 400.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}">"#,
        lo[0] - pad,
        -hi[1] - pad,
        hi[0] - lo[0] + 2.0 * pad,
        hi[1] - lo[1] + 2.0 * pad
    );
    s.push_str("<g transform=\"scale(1,-1)\">\n");
    for c in &copies {
        let pts: Vec<String> = c.iter().map(|v| format!("{},{}", v[0], v[1])).collect();
        let _ = writeln!(s, r##"<polygon points="{}" fill="#f4f4f4" stroke="#999" stroke-width="{sw}"/>"##, pts.join(" "));
    }
    for e in &edges {
        let (a, b) = (e.seg.a.to_f64(), e.seg.b.to_f64());
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#c0392b" stroke-width="{}"/>"##,
            a[0],
            a[1],
            b[0],
            b[1],
            2.0 * sw
        );
    }
    let (_, cert) = beam_feasible(&q, &edges);
    match &cert {
        Certificate::Witness(line) => {
            let (p0, d) = (line.point.to_f64(), line.direction.to_f64());
            let first = &edges[0].seg;
            let last = &edges[edges.len() - 1].seg;
            let t0 = line_hit(p0, d, first.a.to_f64(), first.b.to_f64()).unwrap_or(0.0);
            let t1 = line_hit(p0, d, last.a.to_f64(), last.b.to_f64()).unwrap_or(1.0);
            let at = |t: f64| [p0[0] + t * d[0], p0[1] + t * d[1]];
            let (a, b) = (at(t0), at(t1));
            let _ = writeln!(
                s,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#2c6fbb" stroke-width="{sw}"/>"##,
                a[0], a[1], b[0], b[1]
            );
            println!("realizable: witness through ({}, {}) along ({}, {})", p0[0], p0[1], d[0], d[1]);
        }
        Certificate::Separator { window } => println!("not realizable: no line crosses windows 0..={window}"),
        Certificate::Unresolved => println!("unresolved"),
    }
    s.push_str("</g>\n</svg>\n");
    std::fs::write(svg, s)?;
    run.write_manifest(svg)
}

pub fn count(run: &mut Run, p: &PolygonArg, depth: usize, out: &Path) -> Result<(), CliError> {
    let q = load(run, p)?;
    let e = enumerate(&q, depth, &enum_opts(run, true))?;
    let rows: Vec<Vec<String>> = e
        .counts
        .rows
        .iter()
        .map(|r| {
            [r.n as u64, r.p, r.p_min, r.p_max, r.nc_oriented, r.nc_unoriented, r.uncertain]
                .iter()
                .map(u64::to_string)
                .collect()
        })
        .collect();
    run.unresolved = e.counts.rows.iter().map(|r| r.uncertain).sum();
    run.write_csv(out, &[], &["n", "p", "p_min", "p_max", "Nc_oriented", "Nc_unoriented", "uncertain"], &rows)?;
    println!("p({depth}) = {}, Nc({depth}) = {}", e.counts.p(depth), e.counts.nc(depth));
    Ok(())
}

pub fn spectrum(run: &mut Run, p: &PolygonArg, depth: usize, out: &Path) -> Result<(), CliError> {
    let q = load(run, p)?;
    let mut conns = enumerate(&q, depth, &enum_opts(run, true))?.connections;
    conns.sort_by(|a, b| {
        a.geom_length
            .total_cmp(&b.geom_length)
            .then(a.links.cmp(&b.links))
            .then(a.start_vertex.cmp(&b.start_vertex))
            .then(a.end_vertex.cmp(&b.end_vertex))
            .then_with(|| a.word.cmp(&b.word))
    });
    let rows: Vec<Vec<String>> = conns
        .iter()
        .map(|c| {
            vec![
                f17(c.geom_length),
                c.word.display(&q).to_string(),
                c.links.to_string(),
                c.start_vertex.to_string(),
                c.end_vertex.to_string(),
            ]
        })
        .collect();
    run.write_csv(out, &[], &["length", "word", "links", "start_vertex", "end_vertex"], &rows)?;
    println!("{} oriented connections with at most {depth} links", conns.len());
    Ok(())
}

pub fn cells(run: &mut Run, p: &PolygonArg, start: &StartArg, nmax: usize, out: &Path) -> Result<(), CliError> {
    let q = load(run, p)?;
    let z = start_point(&q, start)?;
    let curve = inradius_curve(&q, &z, nmax)?;
    let rows: Vec<Vec<String>> = curve
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), f17(r.r_lower), f17(r.r_upper), f17(r.ref_t1), f17(r.ref_t2)])
        .collect();
    run.write_csv(out, &[], &["n", "r_lower", "r_upper", "ref_curve_t1", "ref_curve_t2"], &rows)
}

pub fn metric(run: &mut Run, cmd: MetricCommand) -> Result<(), CliError> {
    match cmd {
        MetricCommand::BaCurve { polygon, samples, a, out } => {
            let q = load(run, &polygon)?;
            if a.iter().any(|&x| !(x > 0.0)) {
                return Err(CliError::Usage("every a must be positive".into()));
            }
            let stats = estimate_ba(&q, &a, samples, run.seed());
            run.unresolved = stats.uncertain as u64;
            let rows: Vec<Vec<String>> = stats
                .rows
                .iter()
                .map(|r| vec![f17(r.a), f17(r.mu), f17(r.ci_low), f17(r.ci_high), f17(r.ratio)])
                .collect();
            let mut sorted = stats.rows.clone();
            sorted.sort_by(|x, y| x.a.total_cmp(&y.a));
            let monotone = sorted.windows(2).all(|w| w[0].mu <= w[1].mu);
            let notes = [format!("samples {samples}, unresolved {}", stats.uncertain)];
            run.write_csv(&out, &notes, &["a", "mu", "ci_low", "ci_high", "mu_over_a"], &rows)?;
            println!("max/min of mu/a: {}; monotone in a: {monotone}", f17(stats.ratio_spread()));
            Ok(())
        }
        MetricCommand::Prop9 { polygon, samples, a, nmax, max_draws, out } => {
            let q = load(run, &polygon)?;
            let mut rows = Vec::new();
            let mut ok = true;
            for n in 1..=nmax {
                let r = verify_prop9(&q, a, n, samples, max_draws, run.seed().wrapping_add(n as u64));
                run.unresolved += r.uncertain as u64;
                ok &= r.all_resolved_pass() && r.qualifying == samples;
                rows.push(vec![
                    n.to_string(),
                    f17(r.a),
                    f17(r.radius),
                    r.drawn.to_string(),
                    r.qualifying.to_string(),
                    r.passed.to_string(),
                    r.failures.len().to_string(),
                    r.uncertain.to_string(),
                ]);
            }
            run.write_csv(
                &out,
                &[],
                &["n", "a", "radius", "drawn", "qualifying", "passed", "failures", "uncertain"],
                &rows,
            )?;
            println!("{}", verdict(ok));
            Ok(())
        }
        MetricCommand::ThmEvidence { polygon, samples, f, nmax, out } => {
            let q = load(run, &polygon)?;
            let f = FFunction::parse(&f).ok_or_else(|| CliError::Usage(format!("unknown f {f:?}; use log2, pow0.1 or constN")))?;
            let rep = theorem_experiments(&q, f, nmax, samples, run.seed())?;
            run.unresolved = rep.singular_dropped as u64;
            let rows: Vec<Vec<String>> = rep
                .samples
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let hits: Vec<String> = e.t2_hits.iter().map(usize::to_string).collect();
                    vec![
                        i.to_string(),
                        q.label(e.z.side).to_string(),
                        f17(e.z.s),
                        f17(e.z.theta),
                        e.t1_from.map(|n| n.to_string()).unwrap_or_default(),
                        hits.join(" "),
                    ]
                })
                .collect();
            let notes = [
                format!("finite-horizon evidence only, n <= {nmax}, f = {}; says nothing about the limit", f.name()),
                format!(
                    "t1 tail fraction {}, t2 fraction at n_max {}, singular samples dropped {}",
                    f17(rep.t1_tail_fraction),
                    f17(rep.t2_at_n_max_fraction),
                    rep.singular_dropped
                ),
            ];
            run.write_csv(&out, &notes, &["sample", "side", "s", "theta", "t1_from", "t2_hits"], &rows)?;
            println!("{}", notes[1]);
            Ok(())
        }
        MetricCommand::Cover { polygon, samples, n, eps, out } => {
            let q = load(run, &polygon)?;
            if eps.iter().any(|&e| !(0.0..=1.0).contains(&e)) {
                return Err(CliError::Usage("eps must lie in [0, 1]".into()));
            }
            let words = sampled_words(&q, n, samples, run.seed());
            run.unresolved = (samples - words.len()) as u64;
            let curve = hamming_cover_curve(&words, n, &eps);
            let rows: Vec<Vec<String>> = curve
                .iter()
                .map(|c| {
                    vec![
                        c.n.to_string(),
                        f17(c.eps),
                        c.p_upper.to_string(),
                        c.sample_size.to_string(),
                        c.distinct.to_string(),
                        f17(c.reference),
                    ]
                })
                .collect();
            let notes = ["reference is n^6 f(n)^2 with f(n) = ceil(ln^2(n+1)) and constant 1".to_string()];
            run.write_csv(&out, &notes, &["n", "eps", "p_upper", "sample_size", "distinct", "reference"], &rows)
        }
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

pub fn perturb(run: &mut Run, cmd: PerturbCommand) -> Result<(), CliError> {
    match cmd {
        PerturbCommand::Persist { polygon, delta, trials, depth, out } => {
            let q = load(run, &polygon)?;
            let mut rows = Vec::new();
            let mut ok = true;
            for trial in 0..trials {
                let seed = run.seed().wrapping_add(trial as u64);
                let hat = perturb_table(&q, delta, seed)?;
                let r = persistence_check(&q, &hat, depth)?;
                ok &= r.inequality_holds && r.fully_matched();
                rows.push(vec![
                    trial.to_string(),
                    seed.to_string(),
                    f17(delta),
                    r.nc_base.last().copied().unwrap_or(0).to_string(),
                    r.nc_hat.last().copied().unwrap_or(0).to_string(),
                    r.inequality_holds.to_string(),
                    r.matched.to_string(),
                    r.unmatched.len().to_string(),
                ]);
            }
            run.write_csv(
                &out,
                &[],
                &["trial", "seed", "delta", "nc_base", "nc_hat", "inequality_holds", "matched", "unmatched"],
                &rows,
            )?;
            println!("{}", verdict(ok));
            Ok(())
        }
        PerturbCommand::Scan { family, depth, bisection_steps, out } => {
            let text = std::fs::read_to_string(&family)?;
            let fam = PolygonFamily::from_json(&text)?;
            let mut key = fam.base.canonical_string();
            for d in &fam.displacement {
                let _ = write!(key, "{},{};", d.x, d.y);
            }
            let _ = write!(key, "grid {}", fam.grid);
            run.set_polygon(&key);
            let rep = chain_creation_scan(&fam, depth, &ScanOptions { bisection_steps })?;
            let rows: Vec<Vec<String>> = rep
                .events
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let parent = match &e.parent {
                        EventParent::BaseChain(c) => format!("chain {c}"),
                        EventParent::Emergent { blocker } => format!("emergent at vertex {blocker}"),
                    };
                    let pairs: Vec<String> = e.pairs.iter().map(|(a, b)| format!("{a}-{b}")).collect();
                    let conns: Vec<String> = e
                        .connections
                        .iter()
                        .map(|c| format!("{}-{}:{}", c.start_vertex, c.end_vertex, c.word.display(&fam.base)))
                        .collect();
                    vec![
                        i.to_string(),
                        parent,
                        join(&e.parent_vertices),
                        join(&e.candidates),
                        f17(e.t_low),
                        f17(e.t_high),
                        pairs.join(" "),
                        e.bound.map(|b| b.to_string()).unwrap_or_default(),
                        e.contains_endpoints().to_string(),
                        e.within_bound().to_string(),
                        conns.join(" "),
                    ]
                })
                .collect();
            let notes = [format!("base chains {}, events {}", rep.base_chains.len(), rep.events.len())];
            run.write_csv(
                &out,
                &notes,
                &[
                    "event",
                    "parent",
                    "parent_vertices",
                    "candidates",
                    "t_low",
                    "t_high",
                    "pairs",
                    "bound",
                    "contains_endpoints",
                    "within_bound",
                    "connections",
                ],
                &rows,
            )?;
            let ok = rep.events.iter().all(|e| e.contains_endpoints() && e.within_bound());
            println!("{} events; vertex containment and pair bound: {}", rep.events.len(), verdict(ok));
            Ok(())
        }
        PerturbCommand::Theta { polygon, depth, chain_id, out } => {
            let q = load(run, &polygon)?;
            let e = enumerate(&q, depth, &enum_opts(run, true))?;
            let chains = detect_saddle_chains(&e.connections, &q);
            if chains.is_empty() {
                return Err(CliError::Failed("no saddle chain at this depth".into()));
            }
            let ids: Vec<usize> = match chain_id {
                Some(i) if i >= chains.len() => {
                    return Err(CliError::Usage(format!("chain id {i} out of range, have {}", chains.len())))
                }
                Some(i) => vec![i],
                None => (0..chains.len()).collect(),
            };
            let mut rows = Vec::new();
            for i in ids {
                let c = &chains[i];
                let mut row = vec![i.to_string(), join(&c.vertices()), c.total_links.to_string(), c.cyclic.to_string()];
                match theta_margin(&q, c, depth) {
                    Ok(m) => row.extend([
                        "ok".to_string(),
                        f17(m.angle),
                        m.degenerate.to_string(),
                        m.sc_size.to_string(),
                        m.extensions.to_string(),
                    ]),
                    Err(err) => row.extend([format!("{err}"), String::new(), String::new(), String::new(), String::new()]),
                }
                rows.push(row);
            }
            run.write_csv(
                &out,
                &[],
                &["chain", "vertices", "links", "cyclic", "status", "angle", "degenerate", "sc_size", "extensions"],
                &rows,
            )
        }
        PerturbCommand::Fit { polygon, depth, window, delta, companion_depth, out } => {
            let q = load(run, &polygon)?;
            let window = match window.as_deref() {
                None => ((depth / 2).max(2), depth),
                Some([lo, hi]) => (*lo, *hi),
                Some(_) => return Err(CliError::Usage("--window takes lo,hi".into())),
            };
            let cdepth = companion_depth.unwrap_or(depth);
            let companions: Vec<(f64, usize, u64)> =
                delta.iter().enumerate().map(|(k, &d)| (d, cdepth, run.seed().wrapping_add(k as u64))).collect();
            let rep = exponent_fit(&q, depth, window, &companions)?;
            let row = |label: &str, delta: f64, seed: String, r: &billiard_core::enumeration::EntropyReport| {
                vec![
                    label.to_string(),
                    f17(delta),
                    seed,
                    r.window.0.to_string(),
                    r.window.1.to_string(),
                    f17(r.lower_poly),
                    f17(r.upper_poly),
                    f17(r.at_n_max),
                    f17(r.p_slope),
                    f17(r.nc_slope),
                ]
            };
            let mut rows = vec![row("base", 0.0, String::new(), &rep.base)];
            for (d, s, r) in &rep.perturbed {
                rows.push(row("perturbed", *d, s.to_string(), r));
            }
            run.write_csv(
                &out,
                &["finite-n fits only".to_string()],
                &["table", "delta", "seed", "lo", "hi", "lower_poly", "upper_poly", "at_n_max", "p_slope", "nc_slope"],
                &rows,
            )?;
            println!("base p slope {}, Nc slope {}", f17(rep.base.p_slope), f17(rep.base.nc_slope));
            Ok(())
        }
    }
}

pub fn identity(run: &mut Run, p: &PolygonArg, depth: usize, out: Option<&Path>) -> Result<(), CliError> {
    let q = load(run, p)?;
    let e = enumerate(&q, depth, &enum_opts(run, true))?;
    let rep = check_counting_identity(&e.counts)?;
    println!("convention: {}", rep.convention);
    println!("N(0) = {}", rep.nc0);
    if rep.fitting.len() > 1 {
        println!("{} candidates fit n <= 3; kept the first that fits every n", rep.fitting.len());
    }
    for (n, p, pred, holds) in &rep.per_n {
        if !holds {
            println!("n = {n}: p = {p}, predicted {pred}");
        }
    }
    if let Some(out) = out {
        let rows: Vec<Vec<String>> = rep
            .per_n
            .iter()
            .map(|(n, p, pred, holds)| vec![n.to_string(), p.to_string(), pred.to_string(), holds.to_string()])
            .collect();
        let notes = [format!("convention: {}", rep.convention)];
        run.write_csv(out, &notes, &["n", "p", "predicted", "holds"], &rows)?;
    }
    let ok = rep.passed();
    println!("{}", verdict(ok));
    if ok {
        Ok(())
    } else {
        Err(CliError::Failed("counting identity does not hold".into()))
    }
}
