use ratchet_core::mc::*;
use ratchet_core::*;
use std::time::Instant;
fn main() {
    let p = ModelParams::new(0.0, 1.0, 0.1, 1.5, 2.0).unwrap();
    let (m, _) = linear_schedule(2.0, 5.0).unwrap();
    let lin = StrategySpec::LinearSchedule { c_bar: 2.0, slope: m };
    let s = solve_uniform(p, 500).unwrap();
    let opt = StrategySpec::MultiThreshold(&s);
    for (dt, bridge) in [(1e-2, true), (1e-3, true), (1e-3, false)] {
        let cfg = McConfig { dt, n_paths: 100_000, seed: 1, bridge, ..Default::default() };
        let t = Instant::now();
        let r = simulate(&p, &lin, 5.0, &cfg).unwrap();
        println!("lin dt={dt} bridge={bridge} {:?} {:?}", r.value, t.elapsed());
    }
    for (dt, n) in [(1e-2, 40_000u64)] {
        let cfg = McConfig { dt, n_paths: n, seed: 2, horizon: Some(200.0), ..Default::default() };
        let t = Instant::now();
        let r = simulate(&p, &opt, 5.0, &cfg).unwrap();
        println!("opt {:?} {:?}", r, t.elapsed());
        let r = simulate(&p, &lin, 5.0, &cfg).unwrap();
        println!("lin {:?}", r);
    }
    println!("V(5)={:?}", s.surface_eval(5.0, s.top()));
}
