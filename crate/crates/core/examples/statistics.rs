//! Mean ± standard error, two-sample t-tests and Holm correction on three
//! made-up conditions.

use agentic_control::stats::{format_mean_se, t_test_holm, TTestKind};

fn main() {
    let random = [25.0, 25.0, 24.0, 25.0, 23.0, 25.0, 25.0, 22.0, 25.0, 25.0];
    let agent = [9.0, 11.0, 8.0, 10.0, 12.0, 9.0, 8.0, 10.0, 11.0, 9.0];
    let operator = [8.0, 9.0, 7.0, 10.0, 8.0, 9.0, 8.0, 9.0, 7.0, 8.0];
    for (name, xs) in [("random", &random[..]), ("agent", &agent[..]), ("operator", &operator[..])] {
        println!("{name:<9}{}", format_mean_se(xs));
    }
    let pairs: [(&str, &[f64], &[f64]); 3] = [
        ("random vs agent", &random, &agent),
        ("random vs operator", &random, &operator),
        ("agent vs operator", &agent, &operator),
    ];
    for kind in [TTestKind::Pooled, TTestKind::Welch] {
        println!("\n{kind:?}");
        let inputs: Vec<(&[f64], &[f64])> = pairs.iter().map(|(_, a, b)| (*a, *b)).collect();
        for ((label, _, _), r) in pairs.iter().zip(t_test_holm(&inputs, kind)) {
            println!("  {label:<20} t = {:>6.2}  p = {:.2e}  Holm p = {:.2e}", r.test.t, r.test.p, r.adjusted_p);
        }
    }
}
