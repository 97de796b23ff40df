use atlaspaint_core::atlas::split_hemispheres;
use atlaspaint_core::geom::Vec3;
use atlaspaint_core::mesh::Mesh;
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    prop_oneof![4 => -10.0..10.0f64, 1 => Just(0.0), 1 => (-4i32..4).prop_map(f64::from)]
}

prop_compose! {
    fn mesh()(n in 3usize..40)
        (vertices in prop::collection::vec((coord(), coord(), coord()), n),
         triangles in prop::collection::vec(prop::array::uniform3(0..n as u32), 1..80)) -> Mesh<f64> {
        Mesh::new(vertices.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect(), triangles)
    }
}

fn tri_area(a: Vec3<f64>, b: Vec3<f64>, c: Vec3<f64>) -> f64 {
    let (u, v) = (b - a, c - a);
    let cx = u.y * v.z - u.z * v.y;
    let cy = u.z * v.x - u.x * v.z;
    let cz = u.x * v.y - u.y * v.x;
    0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
}

fn area(m: &Mesh<f64>) -> f64 {
    m.triangles
        .iter()
        .map(|t| tri_area(m.vertices[t[0] as usize], m.vertices[t[1] as usize], m.vertices[t[2] as usize]))
        .sum()
}

/// Fraction of a triangle's area with x ≤ m, from the piecewise-quadratic
/// distribution of x over a triangle with sorted vertex abscissae.
fn fraction_left(xs: [f64; 3], m: f64) -> f64 {
    let mut s = xs;
    s.sort_by(f64::total_cmp);
    let [x0, x1, x2] = s;
    if m <= x0 {
        return if m == x2 { 1.0 } else { 0.0 };
    }
    if m >= x2 {
        return 1.0;
    }
    if m <= x1 {
        (m - x0).powi(2) / ((x2 - x0) * (x1 - x0))
    } else {
        1.0 - (x2 - m).powi(2) / ((x2 - x0) * (x2 - x1))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn area_conserved_and_halfspaces_respected(m in mesh(), mid in prop_oneof![Just(0.0), -3.0..3.0f64]) {
        let (left, right) = split_hemispheres(&m, mid);
        let total = area(&m);
        let (al, ar) = (area(&left), area(&right));
        prop_assert!(((al + ar) - total).abs() <= 1e-6 * total.max(1e-300), "{al} + {ar} vs {total}");

        let expected_left: f64 = m.triangles.iter().map(|t| {
            let [a, b, c] = t.map(|i| m.vertices[i as usize]);
            tri_area(a, b, c) * fraction_left([a.x, b.x, c.x], mid)
        }).sum();
        prop_assert!((al - expected_left).abs() <= 1e-6 * total.max(1e-300), "{al} vs {expected_left}");

        for v in &left.vertices {
            prop_assert!(v.x <= mid + 1e-9, "left vertex at x = {}", v.x);
        }
        for v in &right.vertices {
            prop_assert!(v.x >= mid - 1e-9, "right vertex at x = {}", v.x);
        }
        prop_assert!(left.validate().is_ok() && right.validate().is_ok());
    }
}

#[test]
fn symmetric_closed_mesh_splits_evenly() {
    let m = atlaspaint_core::synthetic::ellipsoid_mesh([0.0, 0.0, 0.0], [3.0, 2.0, 1.0], 24, 12);
    let (l, r) = split_hemispheres(&m, 0.0);
    let (al, ar) = (area(&l), area(&r));
    assert!((al - ar).abs() <= 1e-9 * al, "{al} vs {ar}");
}
