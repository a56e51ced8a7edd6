//! Bilinear quadrilateral shape functions and 2x2 Gauss rule.

/// Parent coordinates of the four nodes, counterclockwise from `(-1, -1)`.
pub const NODE_PARENT: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

const G: f64 = 0.577_350_269_189_625_8;

/// 2x2 Gauss points; every weight is 1.
pub const GAUSS_POINTS: [(f64, f64); 4] = [(-G, -G), (G, -G), (G, G), (-G, G)];
pub const GAUSS_WEIGHTS: [f64; 4] = [1.0; 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeValues {
    pub n: [f64; 4],
    /// `[dN/dxi, dN/deta]` per node.
    pub dn: [[f64; 2]; 4],
}

pub fn shape_eval(xi: f64, eta: f64) -> ShapeValues {
    let mut n = [0.0; 4];
    let mut dn = [[0.0; 2]; 4];
    for (a, &(xa, ya)) in NODE_PARENT.iter().enumerate() {
        n[a] = 0.25 * (1.0 + xi * xa) * (1.0 + eta * ya);
        dn[a] = [0.25 * xa * (1.0 + eta * ya), 0.25 * ya * (1.0 + xi * xa)];
    }
    ShapeValues { n, dn }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn center_value() {
        assert_eq!(shape_eval(0.0, 0.0).n, [0.25; 4]);
    }

    #[test]
    fn corner_is_interpolatory() {
        assert_eq!(shape_eval(1.0, 1.0).n, [0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn gauss_rule_integrates_area() {
        // Reference square has area 4 and det j = 1.
        let total: f64 = GAUSS_WEIGHTS.iter().sum();
        assert_eq!(total, 4.0);
    }

    proptest! {
        #[test]
        fn partition_of_unity(xi in -1.0..=1.0f64, eta in -1.0..=1.0f64) {
            let s = shape_eval(xi, eta);
            prop_assert!((s.n.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            prop_assert!(s.dn.iter().map(|d| d[0]).sum::<f64>().abs() < 1e-14);
            prop_assert!(s.dn.iter().map(|d| d[1]).sum::<f64>().abs() < 1e-14);
        }

        #[test]
        fn reproduces_linear_fields(
            xi in -1.0..=1.0f64,
            eta in -1.0..=1.0f64,
            a in -2.0..2.0f64,
            b in -2.0..2.0f64,
            c in -2.0..2.0f64,
        ) {
            // Arbitrary convex quad; nodal values of x and of a linear field.
            let xs = [(0.0, 0.0), (2.0, 0.3), (2.4, 1.9), (-0.2, 1.5)];
            let s = shape_eval(xi, eta);
            let x: f64 = (0..4).map(|k| s.n[k] * xs[k].0).sum();
            let y: f64 = (0..4).map(|k| s.n[k] * xs[k].1).sum();
            let field: f64 = (0..4).map(|k| s.n[k] * (a + b * xs[k].0 + c * xs[k].1)).sum();
            prop_assert!((field - (a + b * x + c * y)).abs() < 1e-12);
        }
    }
}
