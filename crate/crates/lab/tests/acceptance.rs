//! Acceptance suite: nine criteria, one line each, run without the test
//! harness so the lines are always shown.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use cofra::config::ExperimentConfig;
use cofra::runner::Results;
use cofra::{emit_report, run_experiment, ExperimentKind, Format};
use cofra_core::density::{error_integral_i, error_integral_j};
use cofra_core::frame::{bessel_separation_bound, dimension_lemma_check, frame_operator_spectrum, PointSet, SectionConfig};
use cofra_core::geometry::{
    ball, estimate_annular_decay, fit_growth_exponent, folner_ratio, AnnularDecayConfig, GroupModel, PeriodicMetric, Point,
};
use cofra_core::linalg::{inner, norm};
use cofra_core::rep::{RepModel, Window};
use cofra_core::rng::{gaussian_vector, seeded, unit_vector};
use cofra_core::C64;

type Outcome = Result<String, String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs().join(name)).expect("shipped config parses")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn atom(n: usize, k: usize, l: usize, g: &[C64]) -> Vec<C64> {
    (0..n)
        .map(|m| C64::from_polar(1.0, 2.0 * PI * ((l * m) % n) as f64 / n as f64) * g[(m + n - k) % n])
        .collect()
}

fn orthogonality() -> Outcome {
    let mut worst = 0.0_f64;
    for (i, n) in [4usize, 8, 16].into_iter().enumerate() {
        let mut rng = seeded(1000 + i as u64);
        for _ in 0..20 {
            let (f1, f2) = (unit_vector(&mut rng, n), unit_vector(&mut rng, n));
            let (g1, g2) = (unit_vector(&mut rng, n), unit_vector(&mut rng, n));
            let mut lhs = C64::new(0.0, 0.0);
            for k in 0..n {
                for l in 0..n {
                    lhs += inner(&f1, &atom(n, k, l, &g1)) * inner(&atom(n, k, l, &g2), &f2);
                }
            }
            // d_pi = 1 / N
            let rhs = inner(&f1, &f2) * inner(&g1, &g2).conj() * n as f64;
            worst = worst.max((lhs - rhs).norm());
        }
        let rep = RepModel::finite_weyl_heisenberg(n).unwrap();
        let r = cofra_core::rep::verify_orthogonality(&rep, 20, 1e-10, 7).map_err(|e| e.to_string())?;
        ensure(r.pass, || format!("library check failed for N={n}: {}", r.max_deviation))?;
        worst = worst.max(r.max_deviation);
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.2e}"))
}

fn orthonormal(n: usize, dim: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = seeded(seed);
    let mut basis: Vec<Vec<C64>> = Vec::new();
    while basis.len() < dim {
        let mut v = gaussian_vector(&mut rng, n);
        for b in &basis {
            let c = inner(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let nv = norm(&v);
        basis.push(v.into_iter().map(|x| x / nv).collect());
    }
    basis
}

fn dimension_lemma() -> Outcome {
    let n = 8;
    let rep = RepModel::finite_weyl_heisenberg(n).unwrap();
    let mut rng = seeded(2000);
    let g = gaussian_vector(&mut rng, n);
    let ng2 = norm(&g).powi(2);
    let mut worst = 0.0_f64;
    for dim in [0, 1, 3, 8] {
        let v = orthonormal(n, dim, 2001 + dim as u64);
        let r = dimension_lemma_check(&rep, &Window::Vector(g.clone()), &v).map_err(|e| e.to_string())?;
        let expected = n as f64 * ng2 * dim as f64;
        let mut direct = 0.0;
        for k in 0..n {
            for l in 0..n {
                let a = atom(n, k, l, &g);
                direct += v.iter().map(|b| inner(&a, b).norm_sqr()).sum::<f64>();
            }
        }
        worst = worst.max((r.sum - expected).abs()).max((direct - expected).abs());
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.2e}"))
}

fn bessel_separation() -> Outcome {
    let n = 8;
    let rep = RepModel::finite_weyl_heisenberg(n).unwrap();
    let metric = PeriodicMetric::word(GroupModel::finite_cyclic_sq(n as u32).unwrap()).unwrap();
    let q = ball(&metric, Point::Discrete([0; 3]), 1.0, true).unwrap();
    let mut lines = Vec::new();
    for (i, size) in [8usize, 16, 24, 40, 64].into_iter().enumerate() {
        let mut rng = seeded(3000 + i as u64);
        let g = gaussian_vector(&mut rng, n);
        let mut all: Vec<(usize, usize)> = (0..n).flat_map(|k| (0..n).map(move |l| (k, l))).collect();
        all.shuffle(&mut rng);
        all.truncate(size);
        let lam = PointSet::finite_subset(n, all);
        let w = Window::Vector(g);
        let fb = frame_operator_spectrum(&rep, &w, &lam, &SectionConfig::default()).map_err(|e| e.to_string())?;
        let r1 = bessel_separation_bound(&rep, &w, &lam, &q, fb.b).map_err(|e| e.to_string())?;
        let w2 = w.scaled(2.0);
        let fb2 = frame_operator_spectrum(&rep, &w2, &lam, &SectionConfig::default()).map_err(|e| e.to_string())?;
        let r2 = bessel_separation_bound(&rep, &w2, &lam, &q, fb2.b).map_err(|e| e.to_string())?;
        let rhs = r1.constant * fb.b / norm_sq(&w);
        ensure(r1.pass && (r1.separation.rel_sep as f64) <= rhs, || {
            format!("instance {i}: Rel_Q {} > {rhs}", r1.separation.rel_sep)
        })?;
        ensure(r1.cover_count == r2.cover_count && r1.pass == r2.pass, || {
            format!("instance {i}: rescaling changed n {} -> {}", r1.cover_count, r2.cover_count)
        })?;
        lines.push(format!("{}<={:.1}", r1.separation.rel_sep, rhs));
    }
    Ok(lines.join(" "))
}

fn norm_sq(w: &Window) -> f64 {
    w.norm().powi(2)
}

fn geometry() -> Outcome {
    let z2 = PeriodicMetric::word(GroupModel::integer_lattice(2).unwrap()).unwrap();
    let fz = fit_growth_exponent(&z2, &[4.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0]).map_err(|e| e.to_string())?;
    ensure((1.8..=2.2).contains(&fz.exponent_hat), || format!("Z^2 exponent {}", fz.exponent_hat))?;
    let h3 = PeriodicMetric::word(GroupModel::discrete_heisenberg()).unwrap();
    let radii: Vec<f64> = (4..=12).map(f64::from).collect();
    let fh = fit_growth_exponent(&h3, &radii).map_err(|e| e.to_string())?;
    ensure((3.5..=4.5).contains(&fh.exponent_hat), || format!("H3 exponent {}", fh.exponent_hat))?;
    let e2 = PeriodicMetric::euclidean(2).unwrap();
    let ad = estimate_annular_decay(
        &e2,
        &[1.0, 2.0, 4.0, 8.0, 16.0],
        &[0.05, 0.1, 0.2, 0.4, 0.8],
        AnnularDecayConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    ensure((ad.delta_hat - 1.0).abs() < 1e-12 && ad.c_hat <= 2.0 && ad.violations == 0, || {
        format!("annular decay delta {} c {} violations {}", ad.delta_hat, ad.c_hat, ad.violations)
    })?;
    let o = Point::Discrete([0; 3]);
    let k = ball(&z2, o, 1.0, true).unwrap();
    let f10 = folner_ratio(&z2, &ball(&z2, o, 10.0, true).unwrap(), &k).map_err(|e| e.to_string())?;
    let f20 = folner_ratio(&z2, &ball(&z2, o, 20.0, true).unwrap(), &k).map_err(|e| e.to_string())?;
    ensure(f20 < f10 && f20 < 0.2, || format!("Følner ratios {f10} -> {f20}"))?;
    let run = run_experiment(ExperimentKind::Geometry, &load("geometry_h3.toml"), &configs()).map_err(|e| e.to_string())?;
    ensure(run.report.pass, || "shipped H3 geometry config failed".into())?;
    Ok(format!(
        "Z2 {:.3}, H3 {:.3}, delta {} c {:.3}, Følner {:.3} -> {:.3}",
        fz.exponent_hat, fh.exponent_hat, ad.delta_hat, ad.c_hat, f10, f20
    ))
}

fn density(config: &str, kind_riesz: bool) -> Outcome {
    let cfg = load(config);
    let out = run_experiment(ExperimentKind::Density, &cfg, &configs()).map_err(|e| format!("{e:#}"))?;
    let Results::Density(d) = &out.report.results else {
        return Err("wrong result kind".into());
    };
    let c = &d.counting;
    for chk in &c.checks {
        ensure(chk.pass, || format!("n={} failed: lhs {} rhs {}", chk.n, chk.lhs, chk.rhs))?;
    }
    let last = c.records.last().unwrap();
    ensure((last.radius - 14.0).abs() < 1e-12, || "largest radius is not 14".into())?;
    let (ratio, range, series) = if kind_riesz {
        (last.sup_count as f64 / last.measure, 0.4..=0.6, &c.integrals_j)
    } else {
        (last.inf_count as f64 / last.measure, 3.5..=4.5, &c.integrals_i)
    };
    ensure(range.contains(&ratio), || format!("count/area {ratio}"))?;
    let normalized: Vec<f64> = series.iter().map(|r| r.normalized).collect();
    ensure(normalized.windows(2).all(|w| w[1] < w[0]), || format!("normalized errors {normalized:?}"))?;
    let mut msg = format!("count/area {ratio:.4}, normalized {normalized:.4?}");
    if !kind_riesz {
        let dc = c.density_check.as_ref().ok_or("missing density check")?;
        ensure(dc.pass, || format!("density lower bound {} < {}", dc.lhs, dc.rhs))?;
        let e = d.exponent.as_ref().ok_or("missing exponent check")?;
        ensure(e.pass && e.lhs <= -2.0 / 3.0 + 0.15, || format!("slope {}", e.lhs))?;
        msg.push_str(&format!(", slope {:.3}", e.lhs));
    }
    ensure(out.report.pass, || "report failed".into())?;
    Ok(msg)
}

fn hole() -> Outcome {
    let out = run_experiment(ExperimentKind::Hole, &load("hole.toml"), &configs()).map_err(|e| format!("{e:#}"))?;
    let Results::Hole(h) = &out.report.results else {
        return Err("wrong result kind".into());
    };
    ensure(h.section.radius == 12.0, || "section radius".into())?;
    ensure(h.lower_bounds_monotone, || "A(r) increased".into())?;
    let a: Vec<f64> = h.experiments.iter().map(|e| e.bounds.a).collect();
    ensure(a.windows(2).all(|w| w[1] <= w[0]), || format!("A(r) = {a:?}"))?;
    ensure(h.counterexamples == 0, || format!("{} counterexamples", h.counterexamples))?;
    for e in &h.experiments {
        if let Some(r) = e.theorem_radius {
            ensure(e.hole_radius <= r, || format!("r = {} > R = {r}", e.hole_radius))?;
        }
    }
    for t in &h.tail_checks {
        let env = h.c0 * h.c0 * h.c_double_prime * t.r.powf(1.0 - h.params.delta - h.params.alpha);
        ensure(t.pass && t.tail <= env, || format!("tail {} > {} at r = {}", t.tail, env, t.r))?;
    }
    let rs: Vec<String> = h
        .experiments
        .iter()
        .map(|e| e.theorem_radius.map_or("-".into(), |r| format!("{r:.1}")))
        .collect();
    let a_txt: Vec<String> = a.iter().map(|x| format!("{x:.3e}")).collect();
    Ok(format!("A [{}], R [{}], C = {:.1}", a_txt.join(", "), rs.join(", "), h.constant))
}

fn uniform_in_disk<R: Rng>(rng: &mut R, r: f64) -> [f64; 2] {
    let s = r * rng.gen::<f64>().sqrt();
    let th = 2.0 * PI * rng.gen::<f64>();
    [s * th.cos(), s * th.sin()]
}

fn monte_carlo(samples: usize, seed: u64, r_y: f64, r_w: f64, rho: f64, cut: f64) -> (f64, f64) {
    use rayon::prelude::*;
    let chunks = 16;
    let per = samples / chunks;
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seeded(seed * 1000 + c as u64);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..per {
                let y = uniform_in_disk(&mut rng, r_y);
                let w = uniform_in_disk(&mut rng, r_w);
                if (y[0] + w[0]).hypot(y[1] + w[1]) > cut {
                    let u = (w[0].hypot(w[1]) - rho).max(0.0);
                    let v = (-PI * u * u).exp();
                    s1 += v;
                    s2 += v * v;
                }
            }
            (s1, s2)
        })
        .collect();
    let total = (per * chunks) as f64;
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let m = s1 / total;
    let var = s2 / total - m * m;
    let vol = PI * r_y * r_y * PI * r_w * r_w;
    (vol * m, vol * (var / total).sqrt())
}

fn oracles() -> Outcome {
    let rep = RepModel::gabor_gaussian();
    let g = rep.default_window();
    let e2 = PeriodicMetric::euclidean(2).unwrap();
    let o = Point::Real([0.0; 3]);
    let q = ball(&e2, o, 1.0, true).unwrap();
    let k = ball(&e2, o, 4.0, true).unwrap();
    let i4 = error_integral_i(&rep, &g, &q, &k, 1, 1e-9).map_err(|e| e.to_string())?.value;
    let j4 = error_integral_j(&rep, &g, &q, &k, 1, 1e-9).map_err(|e| e.to_string())?.value;
    // |w| beyond rho + 4 contributes below e^{-16 pi}
    let (mi, si) = monte_carlo(10_000_000, 1, 4.0, 5.0, 1.0, 3.0);
    let (mj, sj) = monte_carlo(10_000_000, 2, 5.0, 5.0, 1.0, 4.0);
    ensure((i4 - mi).abs() <= 3.0 * si, || format!("I4 {i4} vs {mi} +- {si}"))?;
    ensure((j4 - mj).abs() <= 3.0 * sj, || format!("J4 {j4} vs {mj} +- {sj}"))?;

    let mut worst = 0.0_f64;
    for (i, &(n, size)) in [(4usize, 10usize), (5, 14), (6, 20), (7, 30), (8, 40)].iter().enumerate() {
        let mut rng = seeded(4000 + i as u64);
        let gv = gaussian_vector(&mut rng, n);
        let mut all: Vec<(usize, usize)> = (0..n).flat_map(|k| (0..n).map(move |l| (k, l))).collect();
        all.shuffle(&mut rng);
        all.truncate(size);
        let rep = RepModel::finite_weyl_heisenberg(n).unwrap();
        let fb = frame_operator_spectrum(&rep, &Window::Vector(gv.clone()), &PointSet::finite_subset(n, all.clone()), &SectionConfig::default())
            .map_err(|e| e.to_string())?;
        let mut t = DMatrix::<C64>::zeros(size, n);
        for (row, &(k, l)) in all.iter().enumerate() {
            for (col, v) in atom(n, k, l, &gv).into_iter().enumerate() {
                t[(row, col)] = v.conj();
            }
        }
        let sv = t.svd(false, false).singular_values;
        worst = worst.max((fb.a - sv.min().powi(2)).abs()).max((fb.b - sv.max().powi(2)).abs());
    }
    ensure(worst <= 1e-8, || format!("frame bounds differ from SVD by {worst:e}"))?;
    Ok(format!(
        "I4 {i4:.4} (MC {mi:.4} +- {si:.4}), J4 {j4:.4} (MC {mj:.4} +- {sj:.4}), SVD {worst:.1e}"
    ))
}

fn determinism() -> Outcome {
    let cases = [
        (ExperimentKind::Geometry, "geometry_h3.toml"),
        (ExperimentKind::RepCheck, "rep_check.toml"),
        (ExperimentKind::Frame, "frame_finite.toml"),
        (ExperimentKind::Density, "density_frame.toml"),
        (ExperimentKind::Hole, "hole.toml"),
    ];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for (kind, name) in cases {
        let cfg = load(name);
        let mut outputs = Vec::new();
        for round in 0..2 {
            let out = run_experiment(kind, &cfg, &configs()).map_err(|e| format!("{e:#}"))?;
            let path = dir.path().join(format!("{name}-{round}"));
            emit_report(&out, &path, &[Format::Json, Format::Csv]).map_err(|e| e.to_string())?;
            outputs.push(path);
        }
        let mut names: Vec<String> = std::fs::read_dir(&outputs[0])
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n != "timing.json")
            .collect();
        names.sort();
        for n in &names {
            let a = std::fs::read(outputs[0].join(n)).map_err(|e| e.to_string())?;
            let b = std::fs::read(outputs[1].join(n)).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("{name}: {n} differs between runs"))?;
            files += 1;
        }
    }
    Ok(format!("{files} files byte-identical"))
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("1 orthogonality relations", Duration::from_secs(5), orthogonality),
        ("2 dimension lemma", Duration::from_secs(5), dimension_lemma),
        ("3 bessel implies separation", Duration::from_secs(10), bessel_separation),
        ("4 geometry diagnostics", Duration::from_secs(60), geometry),
        ("5 frame counting bound", Duration::from_secs(600), || density("density_frame.toml", false)),
        ("6 riesz counting bound", Duration::from_secs(600), || density("density_riesz.toml", true)),
        ("7 hole falsification", Duration::from_secs(600), hole),
        ("8 oracle equivalence", Duration::from_secs(900), oracles),
        ("9 determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(m) if took > limit => Err(format!("{m}; took {took:.2?} > {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(m) => println!("PASS  {name} ({took:.2?}): {m}"),
            Err(m) => {
                failed += 1;
                println!("FAIL  {name} ({took:.2?}): {m}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria pass");
}
