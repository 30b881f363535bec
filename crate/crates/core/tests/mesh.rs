use std::collections::HashMap;
use std::f64::consts::PI;

use eigendesign::{generate, import_mesh, Curvature, Mesh, MeshError, Shape};
use proptest::prelude::*;

fn shapes() -> Vec<(Shape, f64)> {
    vec![
        (Shape::Interval { length: 1.0 }, 0.01),
        (Shape::Rectangle { a: 1.0, b: 1.0 }, 0.05),
        (Shape::Rectangle { a: 2.0, b: 0.7 }, 0.1),
        (Shape::Disk { radius: 1.0 }, 0.05),
        (Shape::Ellipse { a: 2.0, b: 1.0 }, 0.1),
    ]
}

fn cot(p: [f64; 2], q: [f64; 2], apex: [f64; 2]) -> f64 {
    let u = [p[0] - apex[0], p[1] - apex[1]];
    let v = [q[0] - apex[0], q[1] - apex[1]];
    (u[0] * v[0] + u[1] * v[1]) / (u[0] * v[1] - u[1] * v[0]).abs()
}

#[test]
fn interval_counts() {
    let (m, g) = generate(Shape::Interval { length: 1.0 }, 0.01).unwrap();
    assert_eq!(m.num_elements(), 100);
    assert!((m.domain_measure - 1.0).abs() < 1e-14);
    assert_eq!(m.boundary_vertices, vec![0, 100]);
    assert_eq!(m.boundary_facets.len(), 2);
    assert!(g.max_curvature.is_none());
}

#[test]
fn generated_meshes_are_valid() {
    for (shape, h) in shapes() {
        let (m, _) = generate(shape, h).unwrap();
        let total: f64 = m.element_measure.iter().sum();
        assert!((total - m.domain_measure).abs() <= 1e-12 * m.domain_measure);
        assert!(m.element_measure.iter().all(|&a| a > 0.0));
        assert!(m.max_element_diameter() <= 1.5 * h, "{shape:?}: {}", m.max_element_diameter());
        // positive orientation
        if m.dim == 2 {
            for e in 0..m.num_elements() {
                let n = m.nodes(e);
                let (a, b, c) = (m.vertices[n[0]], m.vertices[n[1]], m.vertices[n[2]]);
                let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
                assert!(area > 0.0);
            }
        }
        // every facet used once or twice; boundary facets once
        let mut uses: HashMap<(usize, usize), usize> = HashMap::new();
        for e in 0..m.num_elements() {
            let n = m.nodes(e);
            let facets: Vec<(usize, usize)> = if m.dim == 1 {
                vec![(n[0], n[0]), (n[1], n[1])]
            } else {
                (0..3).map(|i| (n[i].min(n[(i + 1) % 3]), n[i].max(n[(i + 1) % 3]))).collect()
            };
            for f in facets {
                *uses.entry(f).or_default() += 1;
            }
        }
        assert!(uses.values().all(|&u| u == 1 || u == 2));
        for f in &m.boundary_facets {
            assert_eq!(uses[&(f.a.min(f.b), f.a.max(f.b))], 1);
            assert!(m.nodes(f.element).contains(&f.a) && m.nodes(f.element).contains(&f.b));
        }
    }
}

#[test]
fn boundary_edges_point_outward() {
    // domain on the left of a → b, so the outward normal (dy, -dx) points
    // away from the element centroid
    for (shape, h) in shapes().into_iter().filter(|(s, _)| s.dim() == 2) {
        let (m, _) = generate(shape, h).unwrap();
        for f in &m.boundary_facets {
            let (a, b) = (m.vertices[f.a], m.vertices[f.b]);
            let normal = [b[1] - a[1], a[0] - b[0]];
            let c = m.centroid(f.element);
            let to_c = [c[0] - a[0], c[1] - a[1]];
            assert!(normal[0] * to_c[0] + normal[1] * to_c[1] < 0.0);
        }
    }
}

#[test]
fn generated_meshes_are_delaunay() {
    // sum of cotangents opposite each edge must be non-negative; this is the
    // sign condition on the off-diagonal P1 stiffness entries
    for (shape, h) in shapes().into_iter().filter(|(s, _)| s.dim() == 2) {
        let (m, _) = generate(shape, h).unwrap();
        let mut sums: HashMap<(usize, usize), f64> = HashMap::new();
        for e in 0..m.num_elements() {
            let n = m.nodes(e);
            for i in 0..3 {
                let (a, b, c) = (n[i], n[(i + 1) % 3], n[(i + 2) % 3]);
                *sums.entry((a.min(b), a.max(b))).or_default() += cot(m.vertices[a], m.vertices[b], m.vertices[c]);
            }
        }
        let worst = sums.values().copied().fold(f64::INFINITY, f64::min);
        assert!(worst >= -1e-10, "{shape:?}: {worst}");
    }
}

#[test]
fn disk_curvature_is_reciprocal_radius() {
    for &r in &[1.0, 2.5] {
        let (m, g) = generate(Shape::Disk { radius: r }, r / 20.0).unwrap();
        assert_eq!(g.curvature.len(), m.boundary_vertices.len());
        for c in g.curvature.values() {
            match c {
                Curvature::Smooth(k) => assert!((k - 1.0 / r).abs() < 1e-12),
                Curvature::Corner => panic!("disk has no corners"),
            }
        }
        for &v in &m.boundary_vertices {
            let p = m.vertices[v];
            assert!((p[0].hypot(p[1]) - r).abs() < 1e-12);
        }
    }
}

#[test]
fn ellipse_curvature_peaks_at_major_vertices() {
    let (m, g) = generate(Shape::Ellipse { a: 2.0, b: 1.0 }, 0.05).unwrap();
    let (k, v) = g.max_curvature.unwrap();
    assert!((k - 2.0).abs() < 1e-12);
    assert!((m.vertices[v][0] - 2.0).abs() < 1e-12 && m.vertices[v][1].abs() < 1e-12);
    let p = m.vertices[v];
    assert!((p[0].abs() - 2.0).abs() < 1e-12);
    // each stored value against a finite-difference curvature of the
    // parametrisation t ↦ (2 cos t, sin t)
    let fd = |t: f64| {
        let e = 1e-4;
        let pos = |t: f64| [2.0 * t.cos(), t.sin()];
        let (pm, p0, pp) = (pos(t - e), pos(t), pos(t + e));
        let d1 = [(pp[0] - pm[0]) / (2.0 * e), (pp[1] - pm[1]) / (2.0 * e)];
        let d2 = [(pp[0] - 2.0 * p0[0] + pm[0]) / (e * e), (pp[1] - 2.0 * p0[1] + pm[1]) / (e * e)];
        (d1[0] * d2[1] - d1[1] * d2[0]) / (d1[0].hypot(d1[1])).powi(3)
    };
    for (&vtx, c) in &g.curvature {
        let q = m.vertices[vtx];
        let t = (q[1]).atan2(q[0] / 2.0);
        let Curvature::Smooth(k) = *c else { panic!() };
        assert!((k - fd(t)).abs() < 1e-5, "t={t}: {k} vs {}", fd(t));
    }
}

#[test]
fn rectangle_corners_flagged() {
    let (m, g) = generate(Shape::Rectangle { a: 1.0, b: 2.0 }, 0.1).unwrap();
    let corners: Vec<_> = g.curvature.iter().filter(|(_, c)| **c == Curvature::Corner).map(|(&v, _)| v).collect();
    assert_eq!(corners.len(), 4);
    for v in corners {
        let p = m.vertices[v];
        assert!((p[0] == 0.0 || p[0] == 1.0) && (p[1] == 0.0 || p[1] == 2.0));
    }
    assert_eq!(g.hhat(), 0.0);
    assert!((m.domain_measure - 2.0).abs() < 1e-12);
}

#[test]
fn disk_area_converges_quadratically() {
    let mut prev_err = f64::INFINITY;
    let mut errs = Vec::new();
    for &h in &[0.2, 0.1, 0.05, 0.025] {
        let (m, _) = generate(Shape::Disk { radius: 1.0 }, h).unwrap();
        let err = PI - m.domain_measure;
        assert!(err > 0.0 && err < prev_err);
        prev_err = err;
        errs.push(err);
    }
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }
}

#[test]
fn single_triangle_import() {
    let m = import_mesh("mesh 2 3 1\nv 0 0\nv 1 0\nv 0 1\ne 0 1 2\n").unwrap();
    assert_eq!(m.num_elements(), 1);
    assert_eq!(m.element_measure, vec![0.5]);
    assert_eq!(m.boundary_facets.len(), 3);
    assert_eq!(m.boundary_vertices, vec![0, 1, 2]);
}

#[test]
fn flipped_orientation_is_normalised() {
    let text = "# two triangles, second one clockwise\nmesh 2 4 2\nv 0 0\nv 1 0\nv 1 1\nv 0 1\ne 0 1 2\ne 0 3 2 # cw\n";
    let m = import_mesh(text).unwrap();
    let good = import_mesh("mesh 2 4 2\nv 0 0\nv 1 0\nv 1 1\nv 0 1\ne 0 1 2\ne 0 2 3\n").unwrap();
    assert_eq!(m.element_measure, good.element_measure);
    assert_eq!(m.nodes(1), &[0, 2, 3]);
    assert_eq!(m.boundary_facets, good.boundary_facets);
    let seg = import_mesh("mesh 1 3 2\nv 0\nv 0.5\nv 1\ne 1 0\ne 1 2\n").unwrap();
    assert_eq!(seg.nodes(0), &[0, 1]);
    assert_eq!(seg.element_measure, vec![0.5, 0.5]);
}

#[test]
fn round_trip_is_identity() {
    for (shape, h) in shapes() {
        let (m, _) = generate(shape, h).unwrap();
        let back = import_mesh(&m.to_text()).unwrap();
        assert_eq!(back, m, "{shape:?}");
    }
    let (m, _) = generate(Shape::Rectangle { a: 1.0, b: 1.0 }, 0.25).unwrap();
    assert_eq!(import_mesh(&m.to_text()).unwrap(), m);
}

fn parse_line(text: &str) -> usize {
    match import_mesh(text) {
        Err(MeshError::Parse { line, .. }) => line,
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    assert_eq!(parse_line("v 0 0\n"), 1);
    assert_eq!(parse_line("# c\nmesh 2 3 1\nv 0 0\nv 1 x\nv 0 1\ne 0 1 2\n"), 4);
    assert_eq!(parse_line("mesh 2 3 1\nv 0 0\nv 1 0\nv 0 1\ne 0 1 7\n"), 5);
    assert_eq!(parse_line("mesh 2 3 1\nv 0 0\nv 1 0\nv 0 1\ne 0 1\n"), 5);
    assert_eq!(parse_line("mesh 3 3 1\n"), 1);
    assert_eq!(parse_line("mesh 2 3 1\nv 0 0\nv 1 0\nv 0 1\nq\n"), 5);
    assert_eq!(parse_line("mesh 2 3 2\nv 0 0\nv 1 0\nv 0 1\ne 0 1 2\n"), 5);
}

#[test]
fn zero_area_rejected() {
    let r = import_mesh("mesh 2 3 1\nv 0 0\nv 1 0\nv 2 0\ne 0 1 2\n");
    assert!(matches!(r, Err(MeshError::ZeroMeasure { element: 0 })));
    let r = import_mesh("mesh 2 3 1\nv 0 0\nv 1 0\nv 0 1\ne 0 1 1\n");
    assert!(matches!(r, Err(MeshError::ZeroMeasure { .. })));
}

#[test]
fn non_conforming_rejected() {
    // hanging node: vertex 4 sits on the edge (1, 2) of the first triangle
    let hanging = "mesh 2 5 3\nv 0 0\nv 2 0\nv 0 2\nv 2 2\nv 1 1\ne 0 1 2\ne 1 3 4\ne 4 3 2\n";
    assert!(matches!(import_mesh(hanging), Err(MeshError::NonConforming(_))));
    // three triangles on one edge
    let fan = "mesh 2 5 3\nv 0 0\nv 1 0\nv 0.5 1\nv 0.5 -1\nv 0.5 2\ne 0 1 2\ne 0 3 1\ne 0 1 4\n";
    assert!(matches!(import_mesh(fan), Err(MeshError::NonConforming(_))));
    // disconnected
    let split = "mesh 1 4 2\nv 0\nv 1\nv 2\nv 3\ne 0 1\ne 2 3\n";
    assert!(matches!(import_mesh(split), Err(MeshError::NonConforming(_))));
    // unreferenced vertex
    let orphan = "mesh 2 4 1\nv 0 0\nv 1 0\nv 0 1\nv 5 5\ne 0 1 2\n";
    assert!(matches!(import_mesh(orphan), Err(MeshError::NonConforming(_))));
}

#[test]
fn boundary_loop_is_closed() {
    let (m, _) = generate(Shape::Disk { radius: 1.0 }, 0.1).unwrap();
    let lp = m.boundary_loop();
    assert_eq!(lp.len(), m.boundary_vertices.len());
    // counter-clockwise: shoelace area positive
    let area: f64 = (0..lp.len())
        .map(|i| {
            let (p, q) = (m.vertices[lp[i]], m.vertices[lp[(i + 1) % lp.len()]]);
            0.5 * (p[0] * q[1] - p[1] * q[0])
        })
        .sum();
    assert!((area - m.domain_measure).abs() < 1e-12);
}

#[test]
fn ids_distinguish_meshes() {
    let a = generate(Shape::Disk { radius: 1.0 }, 0.1).unwrap().0;
    let b = generate(Shape::Disk { radius: 1.0 }, 0.1).unwrap().0;
    let c = generate(Shape::Disk { radius: 1.0 }, 0.09).unwrap().0;
    assert_eq!(a.id, b.id);
    assert_ne!(a.id, c.id);
}

fn mesh_for(kind: u8, h: f64) -> Mesh {
    let shape = match kind {
        0 => Shape::Interval { length: 1.3 },
        1 => Shape::Rectangle { a: 1.0, b: 0.8 },
        2 => Shape::Disk { radius: 0.9 },
        _ => Shape::Ellipse { a: 1.5, b: 0.8 },
    };
    generate(shape, h).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn round_trip_any_resolution(kind in 0u8..4, h in 0.04f64..0.19) {
        let m = mesh_for(kind, h);
        prop_assert_eq!(import_mesh(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn measures_sum(kind in 0u8..4, h in 0.04f64..0.19) {
        let m = mesh_for(kind, h);
        let s: f64 = m.element_measure.iter().sum();
        prop_assert!((s - m.domain_measure).abs() <= 1e-12 * m.domain_measure);
        prop_assert!(m.max_element_diameter() <= 1.5 * h);
    }
}
