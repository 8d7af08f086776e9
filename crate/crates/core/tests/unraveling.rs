use doublewell::dynamics::{
    lindblad_solve_sampled, trace_distance, DensityMatrix, Integration, Simulation,
};
use doublewell::spinspace::{angular_momentum_operators, fock_state, ModelParams, QuantumState};

fn ensemble(seeds: std::ops::Range<u64>) -> (Vec<QuantumState>, Vec<Vec<f64>>) {
    let params = ModelParams::new(10, 1.0, 1.0);
    let sim = Simulation::new(params, Integration::new(5.0, 1e-3)).unwrap();
    let psi0 = fock_state(10, 5.0).unwrap();
    seeds
        .map(|s| {
            let out = sim.run(&psi0, None, s, &[]).unwrap();
            (out.final_conditioned, out.log.conditioned.jz)
        })
        .unzip()
}

fn reference() -> Vec<DensityMatrix> {
    let params = ModelParams::new(10, 1.0, 1.0);
    let psi0 = fock_state(10, 5.0).unwrap();
    lindblad_solve_sampled(&DensityMatrix::from_pure(&psi0), &params, 5.0, 1e-3, 10).unwrap()
}

#[test]
fn conditioned_mean_is_a_martingale_of_the_master_equation() {
    let (_, jz) = ensemble(1000..1200);
    let lind = reference();
    let ops = angular_momentum_operators(10).unwrap();
    for k in 1..=10 {
        let idx = 50 * k;
        let values: Vec<f64> = jz.iter().map(|series| series[idx]).collect();
        let m = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
        let se = (var / values.len() as f64).sqrt();
        let want = lind[idx].expectation(&ops.jz).unwrap();
        assert!((m - want).abs() < 3.0 * se, "t = {}: {m} vs {want} (se {se})", idx as f64 * 0.01);
    }
}

#[test]
fn averaged_projector_approaches_master_equation_as_inverse_root() {
    let (finals, _) = ensemble(1..4001);
    let lind = reference();
    let target = lind.last().unwrap();
    let td = |states: &[QuantumState]| trace_distance(&DensityMatrix::mixture(states).unwrap(), target).unwrap();
    let small: Vec<f64> = finals.chunks_exact(250).map(td).collect();
    let mean_small = small.iter().sum::<f64>() / small.len() as f64;
    let large = td(&finals);
    // sampling error ~ c / sqrt(M): sixteen times the trajectories, a quarter of the distance
    let ratio = mean_small / large;
    assert!((2.5..6.0).contains(&ratio), "TD(250) = {mean_small}, TD(4000) = {large}");
    assert!(large < 0.035, "TD(4000) = {large}");
}
