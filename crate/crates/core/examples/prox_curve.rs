//! The scalar log-shift proximal map thresholds small inputs to zero and
//! shrinks large ones less as β decreases.

use logshift::penalty::scalar_logshift_prox;

fn main() {
    let gamma = 1.0;
    print!("{:>6}", "y");
    let betas = [0.1, 0.5, 2.0, f64::INFINITY];
    for b in betas {
        print!("{:>10}", format!("b={b}"));
    }
    println!();
    for i in 0..=12 {
        let y = 0.25 * i as f64;
        print!("{y:>6.2}");
        for b in betas {
            print!("{:>10.4}", scalar_logshift_prox(y, gamma, b));
        }
        println!();
    }
}
