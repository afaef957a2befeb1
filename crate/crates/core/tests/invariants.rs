use std::f64::consts::TAU;

use proptest::prelude::*;

use fcm::assembly::Discretization;
use fcm::geometry::{make_disc_polygon, CutMesh, DomainPolygon};
use fcm::harness::experiments::shifted_setup;
use fcm::point::Vec2;
use fcm::quadrature::triangle_rule;

fn star_polygon(radii: &[f64]) -> DomainPolygon<f64> {
    let n = radii.len() as f64;
    let vertices = radii
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let t = TAU * k as f64 / n;
            Vec2::new(r * t.cos(), r * t.sin())
        })
        .collect();
    DomainPolygon::new(vertices).unwrap()
}

fn check_conservation(domain: DomainPolygon<f64>, h: f64, s: f64) -> Result<(), TestCaseError> {
    let (area, perimeter) = (domain.area(), domain.perimeter());
    let setup = shifted_setup(domain, h, s, 2).unwrap();
    let cuts = CutMesh::new(&setup.domain, &setup.grid).unwrap();
    let inside: f64 = (0..setup.grid.n_elements()).map(|e| cuts.inside_area(e)).sum();
    let mut length = 0.0;
    for e in cuts.cut_elements() {
        let g = cuts.cut_geometry(e).unwrap();
        length += g.chain_length();
        prop_assert!((g.inside_area() + g.outside_area() - h * h).abs() <= 1e-12 * h * h);
    }
    prop_assert!((inside / area - 1.0).abs() <= 1e-10, "area {inside} vs {area}");
    prop_assert!((length / perimeter - 1.0).abs() <= 1e-10, "length {length} vs {perimeter}");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn disc_area_and_length_are_conserved(s in 0.0..=1.0f64, h in 0.05..0.3f64) {
        let disc = make_disc_polygon(Vec2::new(0.0, 0.0), 1.0, 256).unwrap();
        check_conservation(disc, h, s)?;
    }

    #[test]
    fn star_polygon_area_and_length_are_conserved(
        radii in prop::collection::vec(0.4..1.0f64, 5..24),
        s in 0.0..=1.0f64,
        h in 0.05..0.25f64,
    ) {
        check_conservation(star_polygon(&radii), h, s)?;
    }

    #[test]
    fn active_basis_is_a_partition_of_unity(s in 0.0..=1.0f64, u in 0.0..1.0f64, v in 0.0..1.0f64, pick in any::<prop::sample::Index>()) {
        let disc = make_disc_polygon(Vec2::new(0.0, 0.0), 1.0, 128).unwrap();
        let setup = shifted_setup(disc, 0.2, s, 2).unwrap();
        let d = Discretization::new(&setup.domain, setup.grid, 2).unwrap();
        let space = d.space();
        let e = space.active_elements()[pick.index(space.active_elements().len())];
        let lo = space.grid().element_lo(e);
        let x = Vec2::new(lo.x + u * 0.2, lo.y + v * 0.2);
        let basis = space.element_basis(e, x);
        let value: f64 = basis.iter().map(|b| b.value).sum();
        let gx: f64 = basis.iter().map(|b| b.gradient.x).sum();
        let gy: f64 = basis.iter().map(|b| b.gradient.y).sum();
        let lap: f64 = basis.iter().map(|b| b.laplacian).sum();
        prop_assert!(basis.iter().all(|b| b.value >= -1e-15));
        prop_assert!((value - 1.0).abs() < 1e-13);
        prop_assert!(gx.abs() < 1e-10 && gy.abs() < 1e-10 && lap.abs() < 1e-8);
    }

    #[test]
    fn triangle_rule_is_exact_on_barycentric_monomials(
        pts in prop::array::uniform6(-2.0..2.0f64),
        a in 0u32..4, b in 0u32..4, c in 0u32..4,
    ) {
        let (p, q, r) = (Vec2::new(pts[0], pts[1]), Vec2::new(pts[2], pts[3]), Vec2::new(pts[4], pts[5]));
        let twice_area = (q - p).cross(r - p);
        prop_assume!(twice_area.abs() > 1e-2);
        prop_assume!(a + b + c <= 6);
        let lambda = |x: Vec2<f64>| {
            let l1 = (q - x).cross(r - x) / twice_area;
            let l2 = (r - x).cross(p - x) / twice_area;
            (l1, l2, 1.0 - l1 - l2)
        };
        let rule = triangle_rule(p, q, r, 6);
        let numeric: f64 = rule
            .iter()
            .map(|w| {
                let (l1, l2, l3) = lambda(w.point);
                w.weight * l1.powi(a as i32) * l2.powi(b as i32) * l3.powi(c as i32)
            })
            .sum();
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let exact = twice_area * fact(a) * fact(b) * fact(c) / fact(a + b + c + 2);
        prop_assert!((numeric - exact).abs() <= 1e-12 * twice_area.abs(), "{numeric} vs {exact}");
    }
}
