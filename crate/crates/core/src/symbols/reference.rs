//! Fixed test symbols for the quantization checks, all in one dimension.
//!
//! Each is `f(x, xi) w(xi)` with `w = 1` on `|xi| <= 0.8` and `0` on
//! `|xi| >= 1.9`, then windowed in `x` to `[-4.5, 4.5]`. That fits a grid of
//! half-width [`HALF_WIDTH`] with 256 points for every `h >= 0.05`.

use super::{FnSymbol, Jet, Support, SymbolClass, Windowed};
use crate::smooth::window_jet;

pub const HALF_WIDTH: f64 = 5.0;
pub const POINTS: usize = 256;
const X_WINDOW: (f64, f64) = (3.0, 4.5);
const XI_WINDOW: (f64, f64) = (0.8, 1.9);

pub type Reference = Windowed<FnSymbol>;

/// `f` returns the value and the two partial derivatives.
fn build(name: &str, f: impl Fn(f64, f64) -> (f64, f64, f64) + Send + Sync + 'static) -> Reference {
    let s = FnSymbol::new(1, name, SymbolClass { k: 0.0, l: 0.0 }, move |x, xi| {
        let w = window_jet(xi[0], XI_WINDOW.0, XI_WINDOW.1);
        let (v, dx, dxi) = f(x[0], xi[0]);
        Jet {
            value: v * w.value,
            dx: vec![dx * w.value],
            dxi: vec![dxi * w.value + v * w.d1],
        }
    })
    .with_support(Support {
        xi_polynomial: false,
        xi_radius: Some(XI_WINDOW.1),
        x_box: None,
    });
    Windowed::new(s, X_WINDOW.0, X_WINDOW.1)
}

/// `(1 + x^2/4)^{-1} (1 + xi/2)`.
pub fn recovery_symbol() -> Reference {
    build("lorentzian*(1+xi/2)", |x, xi| {
        let u = 1.0 / (1.0 + x * x / 4.0);
        let m = 1.0 + xi / 2.0;
        (u * m, -u * u * x / 2.0 * m, u / 2.0)
    })
}

/// Phase-space points used with [`recovery_symbol`].
pub fn recovery_centers() -> Vec<(f64, f64)> {
    vec![(0.0, 0.0), (1.0, 0.0), (0.5, 0.2), (-0.7, -0.3)]
}

/// `(exp(-x^2/4) xi, sin(x) (1 + xi^2))`.
pub fn bracket_pair() -> (Reference, Reference) {
    let a = build("gauss*xi", |x, xi| {
        let u = (-x * x / 4.0).exp();
        (u * xi, -x / 2.0 * u * xi, u)
    });
    let b = build("sin*(1+xi^2)", |x, xi| {
        let m = 1.0 + xi * xi;
        (x.sin() * m, x.cos() * m, 2.0 * xi * x.sin())
    });
    (a, b)
}

/// `(xi - x/4)^2`, nonnegative and vanishing on a line.
pub fn nonnegative_symbol() -> Reference {
    build("(xi-x/4)^2", |x, xi| {
        let d = xi - x / 4.0;
        (d * d, -d / 2.0, 2.0 * d)
    })
}
