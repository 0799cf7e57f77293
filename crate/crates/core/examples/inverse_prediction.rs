//! Inverts a concave calibration curve on both sides of its vertex and
//! shows how the posterior of the unknown is formed.

use dyncal::inverse::{invert_quadratic, posterior_x0, InversionContext};
use dyncal::Error;

fn main() {
    // y = 1 + 2x - 0.1x² on [0, 8]; vertex at x = 10, outside the domain.
    let (b0, b1, b2) = (1.0, 2.0, -0.1);
    for x0 in [0.5, 3.0, 7.5] {
        let y0 = b0 + b1 * x0 + b2 * x0 * x0;
        let ctx = InversionContext {
            beta1: b1,
            beta2: b2,
            y0,
            y_bar: b0,
            x_bar: 0.0,
            x2_bar: 0.0,
            domain: (0.0, 8.0),
        };
        let inv = invert_quadratic(&ctx).expect("root exists");
        let slope = ctx.slope(inv.x_hat);
        let (mu, s2) = posterior_x0(inv.x_hat, slope, 0.01).expect("finite slope");
        println!(
            "x0 = {x0:>4}: recovered {:.10}, slope {slope:.3}, shrunk mean {mu:.4}, var {s2:.2e}",
            inv.x_hat
        );
    }

    let past_vertex = InversionContext {
        beta1: b1,
        beta2: b2,
        y0: 20.0,
        y_bar: b0,
        x_bar: 0.0,
        x2_bar: 0.0,
        domain: (0.0, 8.0),
    };
    match invert_quadratic(&past_vertex) {
        Err(Error::NoRealRoot { vertex }) => println!("y0 = 20 lies above the maximum (vertex at {vertex})"),
        other => println!("unexpected: {other:?}"),
    }
}
