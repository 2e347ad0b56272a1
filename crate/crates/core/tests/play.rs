use incentive_net::dcrs::{run_dcrs, DcrsParams};
use incentive_net::engine::{simulate, Behavior, SimConfig};
use incentive_net::protocol::{
    construct_appendix_protocol, design_binary_protocol, ppe_one_shot_check, stationary_high_fraction, RatingProtocol,
};
use incentive_net::tft::{tft_incentive_check, TftProfile};
use incentive_net::{LinkValues, Topology, UtilityModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn connected(n: usize, p: f64, seed: u64) -> Topology {
    (0..)
        .map(|k| Topology::random(n, p, seed * 1000 + k))
        .find(|t| t.is_connected())
        .unwrap()
}

fn designed(t: &Topology, m: &UtilityModel<f64>, delta: f64) -> LinkValues<f64> {
    run_dcrs(t, m, delta, &DcrsParams::default()).unwrap().strategy
}

#[test]
fn best_responders_play_like_compliant_agents() {
    for seed in 0..5 {
        let t = connected(7, 0.4, seed);
        let m = UtilityModel::estimation(4.0);
        let delta = 0.85;
        let top = designed(&t, &m, delta);
        let protocol = construct_appendix_protocol(&t, &top, &m, delta).unwrap();
        let mut cfg = SimConfig::new(300, 0.0, seed);
        cfg.record_trace = true;
        let compliant = simulate(&t, &m, &protocol, &vec![Behavior::Compliant; t.n()], &cfg).unwrap();
        let strategic = simulate(&t, &m, &protocol, &vec![Behavior::BestResponse { delta }; t.n()], &cfg).unwrap();
        assert_eq!(compliant.trace, strategic.trace);
    }
}

#[test]
fn designed_protocols_pass_the_one_shot_check() {
    for seed in 0..8 {
        let t = connected(6, 0.5, seed);
        for (r2, delta) in [(2.0, 0.9), (4.0, 0.7), (8.0, 1.0)] {
            let m = UtilityModel::estimation(r2);
            let top = designed(&t, &m, delta);
            if delta < 1.0 {
                let p = design_binary_protocol(&t, &top, &m, delta).unwrap();
                assert!(ppe_one_shot_check(&p, &t, &m, delta, 0.0).unwrap().is_ppe());
            }
            let p = construct_appendix_protocol(&t, &top, &m, delta).unwrap();
            assert!(ppe_one_shot_check(&p, &t, &m, delta, 0.0).unwrap().is_ppe());
        }
    }
}

#[test]
fn occupancy_follows_stationary_fraction_on_random_graph() {
    let t = connected(6, 0.5, 11);
    let m = UtilityModel::estimation(8.0);
    let top = designed(&t, &m, 0.9);
    let p = design_binary_protocol(&t, &top, &m, 0.9).unwrap();
    let eps = 0.05;
    let report = simulate(&t, &m, &p, &vec![Behavior::Compliant; t.n()], &SimConfig::new(50_000, eps, 4)).unwrap();
    for i in 0..t.n() {
        let want = stationary_high_fraction(p.alpha(i, 2), p.beta(i, 1), eps).unwrap();
        assert!((report.high_fraction(i) - want).abs() < 0.015, "agent {i}");
    }
}

#[test]
fn protocol_survives_json_round_trip_in_simulation() {
    let t = connected(5, 0.6, 2);
    let m = UtilityModel::estimation(4.0);
    let top = designed(&t, &m, 0.8);
    let p = design_binary_protocol(&t, &top, &m, 0.8).unwrap();
    let back = RatingProtocol::from_json(&p.to_json().unwrap(), &t).unwrap();
    let cfg = SimConfig::new(2000, 0.1, 8);
    let behaviors = vec![Behavior::Compliant; t.n()];
    let a = simulate(&t, &m, &p, &behaviors, &cfg).unwrap();
    let b = simulate(&t, &m, &back, &behaviors, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tft_sustainable_profiles_meet_rating_condition() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut passing = 0;
    for trial in 0..300u64 {
        let t = connected(rng.gen_range(2..=10), 0.5, trial);
        let r2 = [2.0, 4.0, 8.0][rng.gen_range(0..3)];
        let delta = rng.gen_range(0.5..=1.0);
        let m = UtilityModel::estimation(r2);
        let scale = rng.gen_range(0.01..0.3);
        let profile = LinkValues::from_fn(&t, |_, _| rng.gen_range(0.001..=1.0) * scale);
        let profile = TftProfile::new(&t, profile).unwrap();
        let checks = tft_incentive_check(&profile, &t, &m, delta).unwrap();
        if checks.iter().all(|c| c.passes) {
            passing += 1;
            for i in 0..t.n() {
                let inbound = profile.cooperate().inbound_sum(&t, i);
                let cost = profile.cooperate().outbound_sum(i);
                assert!(delta * (r2 - r2 / (1.0 + inbound)) >= cost - 1e-12);
            }
        }
    }
    assert!(passing > 30, "only {passing} passing profiles");
}
