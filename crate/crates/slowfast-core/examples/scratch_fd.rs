use slowfast_core::analysis::{centered_rates, lyapunov_series};
use slowfast_core::models::make_enhanced_delay;
use slowfast_core::ode::{self, Chart, State, ToleranceConfig};

fn main() {
    let eps = 0.05;
    let m = make_enhanced_delay(eps, Chart::UY).unwrap();
    let f = m.field.clone();
    let cfg = ToleranceConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        max_step: 0.004,
        ..ToleranceConfig::default()
    };
    let traj = ode::integrate_with_aux(&*f, State::new(0.0, [0.3, 0.0]), 25.0, &cfg, &[], &[], Chart::UY).unwrap();
    let rates = centered_rates(&traj, eps);
    let series = lyapunov_series(&traj, eps);
    let mut worst = (0.0f64, 0.0, 0.0, 0.0);
    for (i, r) in rates.iter().enumerate() {
        if r.analytic_rate.abs() > 1e-10 {
            let rel = (r.fd_rate - r.analytic_rate).abs() / r.analytic_rate.abs();
            if rel > worst.1 {
                worst = (r.t, rel, r.fd_rate, r.analytic_rate);
                let k = i + 1;
                let (u, y) = (traj.samples[k].q[0], traj.samples[k].q[1]);
                let h0 = traj.samples[k].t - traj.samples[k-1].t;
                let h1 = traj.samples[k+1].t - traj.samples[k].t;
                eprintln!("t={} u={u:.6} y={y:.6} h0={h0:.6e} h1={h1:.6e} d0={:.6e} d1={:.6e} fd={:.8e} an={:.8e} rel={rel:.3e}",
                    r.t, series.increments[k-1], series.increments[k], r.fd_rate, r.analytic_rate);
            }
        }
    }
    eprintln!("WORST rel {:.4e} at t={} fd {:.8e} analytic {:.8e}", worst.1, worst.0, worst.2, worst.3);
}
