mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semcom::optimizer::{solve, solve_simplified, solve_traditional};
use semcom::resource::{energies, LinkModel, OmissionProfile};

use common::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn load_is_continuous_and_nondecreasing(
        m in 1u32..2000,
        q in prop::collection::vec(0.001f64..=1.0, 1..8),
    ) {
        let profile = OmissionProfile::new(m, q.clone()).unwrap();
        for w in profile.segments().windows(2) {
            let left = w[0].eval(w[0].end);
            prop_assert!((left - w[1].base).abs() <= 1e-9 * w[1].base.max(1.0));
        }
        let top = profile.total_omissible();
        let mut prev = 0.0;
        for i in 0..=200 {
            let e = top * f64::from(i) / 200.0;
            let l = profile.load(e).unwrap();
            prop_assert!(l >= prev);
            let want = load_oracle(f64::from(m), &q, e).unwrap();
            prop_assert!((l - want).abs() <= 1e-9 * want.max(1.0));
            prev = l;
        }
    }

    #[test]
    fn total_omissions_close_the_product_form(
        m in 1u32..5000,
        q in prop::collection::vec(0.001f64..=1.0, 1..8),
    ) {
        let profile = OmissionProfile::new(m, q.clone()).unwrap();
        let kept: f64 = q.iter().map(|qn| 1.0 - qn).product();
        let closed = f64::from(m) * (1.0 - kept);
        prop_assert!((profile.total_omissible() - closed).abs() <= 1e-9 * closed.max(1.0));
    }

    #[test]
    fn transmission_energy_grows_with_power(m in 1u32..300, e_frac in 0.0f64..1.0) {
        let link = LinkModel::default();
        let profile = OmissionProfile::new(m, vec![0.3, 0.2, 0.1]).unwrap();
        let e = (f64::from(profile.max_integer_omissions()) * e_frac) as u32;
        let mut prev = 0.0;
        for k in 0..200 {
            let p = link.p_max_w * 10f64.powf(-8.0 + 8.0 * f64::from(k) / 199.0);
            let e1 = energies(&link, &profile, m, e, p).unwrap().e1;
            prop_assert!(e1 > prev, "e1({p}) = {e1} <= {prev}");
            prev = e1;
        }
    }
}

#[test]
fn traditional_power_matches_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let link = random_link(&mut rng);
        let m = rng.gen_range(1..=400);
        let r = solve_traditional(&link, m).unwrap();
        let p = traditional_power_bisection(&link, m);
        assert!((r.p_opt - p).abs() <= 1e-9 * p, "{} vs {p}", r.p_opt);
        assert!((r.t1 - link.latency_budget_s).abs() <= 1e-9 * link.latency_budget_s);
    }
}

#[test]
fn search_domains_nest() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..300 {
        let link = random_link(&mut rng);
        let m = rng.gen_range(1..=200);
        let profile = OmissionProfile::new(m, random_q(&mut rng, 5)).unwrap();
        let full = solve(&link, &profile, m).unwrap();
        let simple = solve_simplified(&link, &profile, m).unwrap();
        let trad = solve_traditional(&link, m).unwrap();
        if simple.feasible {
            assert!(full.feasible && full.e_total <= simple.e_total);
        }
        // E = 0 lies in both search domains; when its power fits the cap it
        // is exactly the traditional allocation.
        if trad.p_opt <= link.p_max_w {
            assert!(simple.feasible && simple.e_total <= trad.e_total);
        }
    }
}

#[test]
fn generous_budget_drives_power_down() {
    let link = LinkModel {
        latency_budget_s: 10.0,
        ..LinkModel::default()
    };
    let q = [0.3, 0.2, 0.1];
    let profile = OmissionProfile::new(20, q.to_vec()).unwrap();
    let r = solve(&link, &profile, 20).unwrap();
    assert!(r.p_opt < 1e-3 * link.p_max_w);
    let o = grid_oracle(&link, 20, &q, e_max_oracle(20, &q), 2000, 4).unwrap();
    assert!((r.e_total - o.energy).abs() <= 1e-6 * o.energy);
    assert_eq!(r.e_opt, o.e);
}

#[test]
fn infeasibility_agrees_with_oracle() {
    let link = LinkModel {
        latency_budget_s: 2e-6,
        ..LinkModel::default()
    };
    let q = [0.3, 0.2, 0.1];
    let profile = OmissionProfile::new(30, q.to_vec()).unwrap();
    assert!(!solve(&link, &profile, 30).unwrap().feasible);
    assert!(grid_oracle(&link, 30, &q, e_max_oracle(30, &q), 500, 1).is_none());
}
