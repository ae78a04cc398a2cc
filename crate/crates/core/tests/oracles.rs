//! Independent oracles: dense linear algebra, breadth-first search, closed
//! forms and Monte Carlo.

use std::collections::{HashSet, VecDeque};
use std::f64::consts::PI;

use cofra_core::density::{error_integral_i, error_integral_j, lens_area};
use cofra_core::frame::{
    frame_operator_spectrum, lattice_relative_separation, riesz_bounds, PointSet, SectionConfig,
};
use cofra_core::geometry::{ball, GroupModel, PeriodicMetric, Point};
use cofra_core::rep::{matrix_coefficient, RepModel, Window};
use cofra_core::rng::{gaussian_vector, seeded};
use cofra_core::C64;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

fn atom(n: usize, k: usize, l: usize, g: &[C64]) -> Vec<C64> {
    (0..n)
        .map(|m| {
            let phase = 2.0 * PI * (l * m) as f64 / n as f64;
            C64::from_polar(1.0, phase) * g[(m + n - k) % n]
        })
        .collect()
}

fn analysis_matrix(n: usize, lambda: &[(usize, usize)], g: &[C64]) -> DMatrix<C64> {
    let mut t = DMatrix::<C64>::zeros(lambda.len(), n);
    for (row, &(k, l)) in lambda.iter().enumerate() {
        for (col, v) in atom(n, k, l, g).into_iter().enumerate() {
            t[(row, col)] = v.conj();
        }
    }
    t
}

fn random_instance(seed: u64, n: usize, size: usize) -> (Vec<C64>, Vec<(usize, usize)>) {
    let mut rng = seeded(seed);
    let g = gaussian_vector(&mut rng, n);
    let mut all: Vec<(usize, usize)> = (0..n).flat_map(|k| (0..n).map(move |l| (k, l))).collect();
    all.shuffle(&mut rng);
    all.truncate(size);
    all.sort_unstable();
    (g, all)
}

#[test]
fn finite_frame_bounds_match_dense_svd() {
    let cases = [(4, 10), (5, 14), (6, 20), (7, 30), (8, 40)];
    for (i, &(n, size)) in cases.iter().enumerate() {
        let (g, lam) = random_instance(100 + i as u64, n, size);
        let rep = RepModel::finite_weyl_heisenberg(n).unwrap();
        let ps = PointSet::finite_subset(n, lam.clone());
        let fb = frame_operator_spectrum(&rep, &Window::Vector(g.clone()), &ps, &SectionConfig::default()).unwrap();
        let sv = analysis_matrix(n, &lam, &g).svd(false, false).singular_values;
        let smax = sv.max().powi(2);
        let smin = sv.min().powi(2);
        assert!((fb.b - smax).abs() < 1e-8 * smax.max(1.0), "B {} vs {}", fb.b, smax);
        assert!((fb.a - smin).abs() < 1e-8 * smax.max(1.0), "A {} vs {}", fb.a, smin);
    }
}

#[test]
fn gram_and_frame_operator_share_the_top_of_the_spectrum() {
    let n = 6;
    let (g, lam) = random_instance(7, n, 9);
    let rep = RepModel::finite_weyl_heisenberg(n).unwrap();
    let ps = PointSet::finite_subset(n, lam.clone());
    let w = Window::Vector(g.clone());
    let rb = riesz_bounds(&rep, &w, &ps, &SectionConfig::default()).unwrap();
    let t = analysis_matrix(n, &lam, &g);
    let gram = &t * t.adjoint();
    let eig = gram.symmetric_eigenvalues();
    assert!((rb.b - eig.max()).abs() < 1e-9 * eig.max());
    // 9 vectors in C^6 are dependent
    assert_eq!(rb.a, 0.0);
}

fn bfs_heisenberg(radius: u32) -> usize {
    type M = (i64, i64, i64);
    // (a, b, c) ~ [[1, a, c], [0, 1, b], [0, 0, 1]]
    let mul = |x: M, y: M| (x.0 + y.0, x.1 + y.1, x.2 + y.2 + x.0 * y.1);
    let gens: [M; 4] = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)];
    let mut seen: HashSet<M> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert((0, 0, 0));
    queue.push_back(((0, 0, 0), 0));
    while let Some((x, d)) = queue.pop_front() {
        if d == radius {
            continue;
        }
        for s in gens {
            let y = mul(x, s);
            if seen.insert(y) {
                queue.push_back((y, d + 1));
            }
        }
    }
    seen.len()
}

#[test]
fn word_balls_match_breadth_first_search() {
    let h3 = PeriodicMetric::word(GroupModel::discrete_heisenberg()).unwrap();
    let z2 = PeriodicMetric::word(GroupModel::integer_lattice(2).unwrap()).unwrap();
    for r in 0..=7u32 {
        let b = ball(&h3, Point::Discrete([0, 0, 0]), r as f64, true).unwrap();
        assert_eq!(b.elements().unwrap().len(), bfs_heisenberg(r), "radius {r}");
        let b = ball(&z2, Point::Discrete([0, 0, 0]), r as f64, true).unwrap();
        let r = r as usize;
        assert_eq!(b.elements().unwrap().len(), 2 * r * r + 2 * r + 1);
    }
}

#[test]
fn finite_balls_wrap_around() {
    let g = GroupModel::finite_cyclic_sq(5).unwrap();
    let m = PeriodicMetric::word(g).unwrap();
    let b = ball(&m, Point::Discrete([0, 0, 0]), 10.0, true).unwrap();
    assert_eq!(b.elements().unwrap().len(), 25);
    let b = ball(&m, Point::Discrete([0, 0, 0]), 1.0, true).unwrap();
    assert_eq!(b.elements().unwrap().len(), 5);
}

#[test]
fn numeric_window_reproduces_gaussian_coefficient() {
    let step = 1.0 / 512.0;
    let start = -6.0;
    let values: Vec<C64> = (0..=(12.0 / step) as usize)
        .map(|j| {
            let t = start + j as f64 * step;
            C64::new(2f64.powf(0.25) * (-PI * t * t).exp(), 0.0)
        })
        .collect();
    let w = Window::Samples { start, step, values };
    let rep = RepModel::gabor_numeric();
    let v = matrix_coefficient(&rep, &w, &w, Point::Real([1.0, 0.0, 0.0])).unwrap();
    assert!((v.norm() - (-PI / 2.0).exp()).abs() < 1e-5, "{}", v.norm());
    let v = matrix_coefficient(&rep, &w, &w, Point::Real([0.5, 1.0, 0.0])).unwrap();
    assert!((v.norm() - (-PI * 1.25 / 2.0).exp()).abs() < 1e-5);
}

#[test]
fn lattice_separation_matches_sampled_counts() {
    let mut rng = seeded(3);
    for &(a, b, rho) in &[(1.0, 1.0, 1.0), (0.5, 0.5, 1.0), (2.0, 1.0, 1.25), (1.0, 1.0, 0.5)] {
        let exact = lattice_relative_separation(a, b, rho).unwrap();
        let lam = PointSet::lattice(a, b).unwrap();
        let mut best = 0;
        for _ in 0..4000 {
            let c = [rng.gen::<f64>() * a, rng.gen::<f64>() * b];
            best = best.max(lam.points_in_disk(c, rho, true).unwrap().len());
        }
        assert!(best <= exact, "{a} {b} {rho}: sampled {best} > {exact}");
        assert!(best + 2 >= exact, "{a} {b} {rho}: sampled {best} far below {exact}");
    }
}

fn uniform_in_disk<R: Rng>(rng: &mut R, r: f64) -> [f64; 2] {
    let s = r * rng.gen::<f64>().sqrt();
    let th = 2.0 * PI * rng.gen::<f64>();
    [s * th.cos(), s * th.sin()]
}

fn maximal_sq(s: f64, rho: f64) -> f64 {
    let u = (s - rho).max(0.0);
    (-PI * u * u).exp()
}

/// Monte Carlo estimate and standard error of
/// `int_{|y| < r_y} int_{|w| < r_w} F(w) [|y + w| vs cut]`.
fn monte_carlo(samples: usize, seed: u64, r_y: f64, r_w: f64, rho: f64, cut: f64) -> (f64, f64) {
    let mut rng = seeded(seed);
    let vol = PI * r_y * r_y * PI * r_w * r_w;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let y = uniform_in_disk(&mut rng, r_y);
        let w = uniform_in_disk(&mut rng, r_w);
        let z = (y[0] + w[0]).hypot(y[1] + w[1]);
        let v = if z > cut { maximal_sq(w[0].hypot(w[1]), rho) } else { 0.0 };
        s1 += v;
        s2 += v * v;
    }
    let m = s1 / samples as f64;
    let var = (s2 / samples as f64 - m * m).max(0.0);
    (vol * m, vol * (var / samples as f64).sqrt())
}

#[test]
fn error_integrals_agree_with_monte_carlo() {
    let rep = RepModel::gabor_gaussian();
    let g = rep.default_window();
    let metric = PeriodicMetric::euclidean(2).unwrap();
    let o = Point::Real([0.0; 3]);
    let rho = 1.0;
    let q = ball(&metric, o, rho, true).unwrap();
    let k = ball(&metric, o, 4.0, true).unwrap();
    let i4 = error_integral_i(&rep, &g, &q, &k, 1, 1e-9).unwrap().value;
    let j4 = error_integral_j(&rep, &g, &q, &k, 1, 1e-9).unwrap().value;
    // beyond |w| = rho + 4 the integrand is below e^{-16 pi}
    let (mi, si) = monte_carlo(2_000_000, 11, 4.0, rho + 4.0, rho, 4.0 - rho);
    assert!((i4 - mi).abs() <= 3.0 * si, "I4 {i4} vs {mi} +- {si}");
    // J: z in K Q, y = z + w outside K
    let (mj, sj) = monte_carlo(2_000_000, 12, 4.0 + rho, rho + 4.0, rho, 4.0);
    assert!((j4 - mj).abs() <= 3.0 * sj, "J4 {j4} vs {mj} +- {sj}");
}

#[test]
fn lens_area_matches_grid_count() {
    let (r1, r2, d): (f64, f64, f64) = (3.0, 2.0, 2.5);
    let h = 0.005;
    let mut count = 0usize;
    let mut x: f64 = -r1;
    while x <= r1 {
        let mut y: f64 = -r1;
        while y <= r1 {
            if x.hypot(y) <= r1 && (x - d).hypot(y) <= r2 {
                count += 1;
            }
            y += h;
        }
        x += h;
    }
    let grid = count as f64 * h * h;
    assert!((grid - lens_area(r1, r2, d)).abs() < 0.01, "{grid} vs {}", lens_area(r1, r2, d));
}
