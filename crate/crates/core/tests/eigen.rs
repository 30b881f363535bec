use eigendesign::{assemble, generate, principal_lambda, rho, Design, EigenError, Mesh, Operators, Shape};
use proptest::prelude::*;

fn interval(h: f64) -> Mesh {
    generate(Shape::Interval { length: 1.0 }, h).unwrap().0
}

fn left_to_right(mesh: &Mesh) -> Vec<usize> {
    let mut order: Vec<usize> = (0..mesh.num_elements()).collect();
    order.sort_by(|&a, &b| mesh.centroid(a)[0].total_cmp(&mesh.centroid(b)[0]));
    order
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// D = (0, δ) in (0, 1): cos in D, cosh decaying to the Neumann end outside
fn interval_oracle(delta: f64, beta: f64) -> f64 {
    let g = |lam: f64| {
        let s = lam.sqrt();
        let t = (lam * beta).sqrt();
        s * (s * delta).tan() - t * (t * (1.0 - delta)).tanh()
    };
    let cap = (std::f64::consts::PI / (2.0 * delta)).powi(2);
    bisect(1e-12, cap * (1.0 - 1e-12), g)
}

#[test]
fn interval_matches_transcendental_equation() {
    for &(delta, beta) in &[(0.25, 1.0), (0.1, 2.0), (0.4, 0.8)] {
        let exact = interval_oracle(delta, beta);
        let mut errs = Vec::new();
        for &h in &[1.0 / 200.0, 1.0 / 400.0] {
            let mesh = interval(h);
            let d = Design::greedy(&mesh, beta, &left_to_right(&mesh), delta).unwrap();
            assert!(d.fractional_element().is_none());
            let r = principal_lambda(&mesh, &d).unwrap();
            let rel = (r.lambda - exact) / exact;
            // conforming Galerkin: discrete value is an upper bound
            assert!(rel > 0.0, "delta {delta} beta {beta}: {} vs {exact}", r.lambda);
            assert!(rel < 1e-3, "rel {rel}");
            errs.push(rel);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }
}

#[test]
fn reflected_design_has_same_eigenvalue() {
    let mesh = interval(1.0 / 64.0);
    let order = left_to_right(&mesh);
    let rev: Vec<usize> = order.iter().rev().copied().collect();
    let a = principal_lambda(&mesh, &Design::greedy(&mesh, 1.5, &order, 0.3).unwrap()).unwrap();
    let b = principal_lambda(&mesh, &Design::greedy(&mesh, 1.5, &rev, 0.3).unwrap()).unwrap();
    assert!((a.lambda - b.lambda).abs() < 1e-9 * a.lambda);
}

// radial shooting: (r u')' = -λ m(r) r u on (0, 1), Neumann at r = 1
fn disk_oracle(r0: f64, beta: f64) -> f64 {
    let slope = |lam: f64| {
        let n_in = 4000;
        let n_out = 8000;
        let eps = 1e-6;
        let mut r = eps;
        let mut y = [1.0 - lam * eps * eps / 4.0, -lam * eps / 2.0];
        let f = |r: f64, y: [f64; 2], m: f64| [y[1], -y[1] / r - lam * m * y[0]];
        let step = |r: &mut f64, y: &mut [f64; 2], h: f64, m: f64| {
            let k1 = f(*r, *y, m);
            let k2 = f(*r + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]], m);
            let k3 = f(*r + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]], m);
            let k4 = f(*r + h, [y[0] + h * k3[0], y[1] + h * k3[1]], m);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            *r += h;
        };
        let h1 = (r0 - eps) / n_in as f64;
        for _ in 0..n_in {
            step(&mut r, &mut y, h1, 1.0);
        }
        let h2 = (1.0 - r0) / n_out as f64;
        for _ in 0..n_out {
            step(&mut r, &mut y, h2, -beta);
        }
        y[1]
    };
    // u'(1) < 0 below the eigenvalue, > 0 above (u still positive)
    let cap = (2.404825557695773 / r0).powi(2);
    bisect(1e-6, cap * 0.999, slope)
}

#[test]
fn centered_disk_matches_radial_shooting() {
    let (r0, beta) = (0.4, 1.0);
    let exact = disk_oracle(r0, beta);
    let mesh = generate(Shape::Disk { radius: 1.0 }, 0.04).unwrap().0;
    let mut order: Vec<usize> = (0..mesh.num_elements()).collect();
    let dist = |e: usize| {
        let c = mesh.centroid(e);
        c[0].hypot(c[1])
    };
    order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
    let delta = std::f64::consts::PI * r0 * r0;
    let d = Design::greedy(&mesh, beta, &order, delta).unwrap();
    let r = principal_lambda(&mesh, &d).unwrap();
    assert!(((r.lambda - exact) / exact).abs() < 0.01, "{} vs {exact}", r.lambda);
}

#[test]
fn result_invariants_hold() {
    let mesh = generate(Shape::Rectangle { a: 1.0, b: 0.7 }, 0.05).unwrap().0;
    let mut order: Vec<usize> = (0..mesh.num_elements()).collect();
    order.sort_by(|&a, &b| mesh.centroid(a)[0].total_cmp(&mesh.centroid(b)[0]).then(a.cmp(&b)));
    let d = Design::greedy(&mesh, 2.0, &order, 0.123).unwrap();
    let r = principal_lambda(&mesh, &d).unwrap();
    assert!(r.lambda > 0.0);
    assert!((r.rayleigh - r.lambda).abs() <= 1e-8 * r.lambda);
    assert!(r.equation_residual <= 1e-7, "residual {}", r.equation_residual);
    assert!(r.u.iter().all(|&v| v > 0.0));
    let max = r.u.iter().copied().fold(0.0, f64::max);
    assert_eq!(max, 1.0);
    // bracket certification: ρ changes sign across λ(1 ± 1e-9)
    assert!(rho(&mesh, &d, r.lambda * (1.0 - 1e-9)).unwrap() > 0.0);
    assert!(rho(&mesh, &d, r.lambda * (1.0 + 1e-9)).unwrap() < 0.0);
}

#[test]
fn rho_vanishes_at_zero_and_is_concave() {
    let mesh = interval(1.0 / 50.0);
    let d = Design::greedy(&mesh, 1.0, &left_to_right(&mesh), 0.2).unwrap();
    let ops = Operators::new(&mesh).unwrap();
    assert!(ops.rho(&d, 0.0).unwrap().abs() < 1e-10);
    assert!(ops.rho(&d, 1e-3).unwrap() > 0.0);
    let lam = principal_lambda(&mesh, &d).unwrap().lambda;
    let xs: Vec<f64> = (0..=8).map(|i| lam * 0.3 * i as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| ops.rho(&d, x).unwrap()).collect();
    for i in 1..xs.len() - 1 {
        assert!(ys[i] >= 0.5 * (ys[i - 1] + ys[i + 1]) - 1e-9 * lam, "not concave at {}", xs[i]);
    }
}

#[test]
fn warm_start_reproduces_cold_start() {
    let mesh = generate(Shape::Disk { radius: 1.0 }, 0.1).unwrap().0;
    let ops = Operators::new(&mesh).unwrap();
    let mut order: Vec<usize> = (0..mesh.num_elements()).collect();
    order.sort_by(|&a, &b| mesh.centroid(a)[1].total_cmp(&mesh.centroid(b)[1]).then(a.cmp(&b)));
    let d1 = Design::greedy(&mesh, 1.0, &order, 0.5).unwrap();
    let d2 = Design::greedy(&mesh, 1.0, &order, 0.55).unwrap();
    let cold = ops.principal(&d2, None).unwrap();
    let hint = ops.principal(&d1, None).unwrap();
    let warm = ops.principal(&d2, Some(&hint)).unwrap();
    assert!((cold.lambda - warm.lambda).abs() < 1e-9 * cold.lambda);
}

#[test]
fn nonnegative_average_is_rejected() {
    let mesh = interval(0.1);
    // build the weight directly: fill everything, bypassing admissibility
    let d = Design {
        mesh_id: mesh.id,
        beta: 1.0,
        fill: vec![1.0; mesh.num_elements()],
        delta: 1.0,
    };
    assert!(matches!(principal_lambda(&mesh, &d), Err(EigenError::NonNegativeAverage { .. })));
}

#[test]
fn design_thinner_than_the_mesh_is_unresolved() {
    let mesh = interval(0.1);
    let order = left_to_right(&mesh);
    // one interior element with beta = 2: both its nodes carry net negative weight
    let mut fill = vec![0.0; mesh.num_elements()];
    fill[order[4]] = 1.0;
    let d = Design::from_fill(&mesh, 2.0, fill).unwrap();
    assert!(matches!(principal_lambda(&mesh, &d), Err(EigenError::Unresolved)));
}

#[test]
fn mismatched_mesh_is_rejected() {
    let a = interval(0.1);
    let b = interval(0.05);
    let d = Design::greedy(&a, 1.0, &left_to_right(&a), 0.2).unwrap();
    assert!(matches!(principal_lambda(&b, &d), Err(EigenError::MeshMismatch { .. })));
}

#[test]
fn assembled_matrices_have_expected_structure() {
    let mesh = generate(Shape::Ellipse { a: 1.0, b: 0.6 }, 0.1).unwrap().0;
    let mut order: Vec<usize> = (0..mesh.num_elements()).collect();
    order.sort_by(|&a, &b| mesh.centroid(b)[0].total_cmp(&mesh.centroid(a)[0]).then(a.cmp(&b)));
    let d = Design::greedy(&mesh, 3.0, &order, 0.4).unwrap();
    let m = assemble(&mesh, &d).unwrap();
    let n = mesh.num_vertices();
    let ones = vec![1.0; n];
    assert!(m.stiffness.matvec(&ones).iter().all(|v| v.abs() < 1e-12));
    assert!((m.mass.quad(&ones) - mesh.domain_measure).abs() < 1e-12);
    assert!((m.weighted_mass.quad(&ones) - d.weight_integral(&mesh)).abs() < 1e-12);
    let dense = m.stiffness.to_dense();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                assert!(dense[i][j] <= 1e-12, "K[{i}][{j}] = {}", dense[i][j]);
            }
        }
    }
    // x = first coordinate: xᵀKx = |Ω|
    let x: Vec<f64> = mesh.vertices.iter().map(|p| p[0]).collect();
    assert!((m.stiffness.quad(&x) - mesh.domain_measure).abs() < 1e-10);
}

#[test]
fn interval_matrices_match_hand_assembly() {
    let mesh = interval(0.25);
    let d = Design::greedy(&mesh, 1.0, &left_to_right(&mesh), 0.25).unwrap();
    let m = assemble(&mesh, &d).unwrap();
    let order = {
        let mut v: Vec<usize> = (0..mesh.num_vertices()).collect();
        v.sort_by(|&a, &b| mesh.vertices[a][0].total_cmp(&mesh.vertices[b][0]));
        v
    };
    let k = m.stiffness.to_dense();
    let expect_k = [[4., -4., 0., 0., 0.], [-4., 8., -4., 0., 0.], [0., -4., 8., -4., 0.], [0., 0., -4., 8., -4.], [0., 0., 0., -4., 4.]];
    for i in 0..5 {
        for j in 0..5 {
            assert!((k[order[i]][order[j]] - expect_k[i][j]).abs() < 1e-12);
        }
    }
    let w = m.weighted_mass.to_dense();
    // first element has weight 1, the rest -1
    assert!((w[order[0]][order[0]] - 0.125).abs() < 1e-15);
    assert!(w[order[1]][order[1]].abs() < 1e-15);
    assert!((w[order[2]][order[2]] + 0.25).abs() < 1e-15);
    assert!(w[order[0]][order[1]].abs() < 1e-15);
    let mass = m.mass.to_dense();
    for i in 0..5 {
        let row: f64 = mass[i].iter().sum();
        assert!((row - mass[i][i]).abs() < 1e-15, "lumped mass is diagonal");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // enlarging the favourable set lowers the eigenvalue
    #[test]
    fn eigenvalue_decreases_under_inclusion(start in 0usize..40, len in 2usize..8, extra in 1usize..6, beta in 0.5f64..3.0) {
        let mesh = interval(1.0 / 40.0);
        let order = left_to_right(&mesh);
        let pick = |k: usize| -> Vec<f64> {
            let mut f = vec![0.0; mesh.num_elements()];
            for i in 0..k { f[order[(start + i) % 40]] = 1.0; }
            f
        };
        let small = Design::from_fill(&mesh, beta, pick(len)).unwrap();
        let large = Design::from_fill(&mesh, beta, pick(len + extra)).unwrap();
        let a = principal_lambda(&mesh, &small).unwrap().lambda;
        let b = principal_lambda(&mesh, &large).unwrap().lambda;
        prop_assert!(b < a);
    }

    #[test]
    fn rho_changes_sign_at_lambda(delta in 0.05f64..0.4, beta in 0.5f64..4.0) {
        let mesh = interval(1.0 / 30.0);
        let bound = beta / (beta + 1.0);
        prop_assume!(delta < bound * 0.95);
        let d = Design::greedy(&mesh, beta, &left_to_right(&mesh), delta).unwrap();
        let r = principal_lambda(&mesh, &d).unwrap();
        prop_assert!(rho(&mesh, &d, r.lambda * (1.0 - 1e-8)).unwrap() > 0.0);
        prop_assert!(rho(&mesh, &d, r.lambda * (1.0 + 1e-8)).unwrap() < 0.0);
        prop_assert!(r.equation_residual < 1e-7);
    }
}
