use brlab_core::*;
use brlab_core::sheet::tangent_winding;
use brlab_core::kernel::KernelSpec;
use brlab_core::evolve::{run, IntegratorConfig, Method};
use brlab_core::oracles::kh_growing_mode;
use std::time::Instant;

fn main() {
    // where does the fixed-step run lose it?
    let z0 = kh_growing_mode(512, 1, 0.1).unwrap();
    let kb = KernelSpec::blob(0.2).unwrap();
    let cfg = IntegratorConfig { method: Method::Rk4 { dt: 0.0125 }, t_end: 12.0, filter_level: 1e-12, snapshot_every: 80 };
    let traj = run(&z0, &cfg, &kb).unwrap();
    for s in &traj.snapshots {
        let w = tangent_winding(s).map(|v| v / std::f64::consts::TAU);
        let za = s.derivative();
        let min_za = za.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        let max_za = za.iter().map(|v| v.norm()).fold(0.0, f64::max);
        println!("t={:6.2} winding/2pi={:?} |z_a| in [{:.3}, {:.3}]", s.time(), w.map(|x| (x * 1000.0).round() / 1000.0).ok(), min_za, max_za);
    }
    println!("abort: {:?}", traj.abort.map(|a| a.describe()));
    // adaptive comparison
    let cfg2 = IntegratorConfig { method: Method::Rk45 { tol: 1e-9 }, t_end: 12.0, filter_level: 1e-12, snapshot_every: 50 };
    let t0 = Instant::now();
    let traj2 = run(&z0, &cfg2, &kb).unwrap();
    let wf = tangent_winding(traj2.final_state()).map(|v| v / std::f64::consts::TAU);
    println!("rk45: t_final={:.2} steps~{} winding/2pi={:?} abort={:?} time {:.0}s", traj2.final_state().time(), traj2.snapshots.len()*50, wf.ok(), traj2.abort.map(|a| a.describe()), t0.elapsed().as_secs_f64());
}
