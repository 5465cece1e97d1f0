use adjustkit::ci::{delta_ci, delta_ci_alternative};
use adjustkit::estimators::{alpha, exact_adjustment};
use adjustkit::gallery;
use adjustkit::search::{amba, bamba, brute_force_min_blanket};
use adjustkit::{AdjustmentQuery, CiQuery, CiTester, Event, JointDistribution, VariableSpec};
use proptest::prelude::*;
use rand::Rng;

fn random_dist() -> impl Strategy<Value = JointDistribution> {
    (2usize..=5, 1usize..=3, any::<u64>(), 0.0f64..0.5)
        .prop_map(|(n, card, seed, floor)| gallery::random(n, card, seed, floor).unwrap())
}

fn binary_dist(vars: usize) -> impl Strategy<Value = JointDistribution> {
    any::<u64>().prop_map(move |seed| gallery::random(vars, 2, seed, 0.05).unwrap())
}

fn subset(names: &[String], mask: u32) -> Vec<String> {
    names
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, n)| n.clone())
        .collect()
}

fn all_subsets(names: &[String]) -> Vec<Vec<String>> {
    (0..1u32 << names.len()).map(|m| subset(names, m)).collect()
}

/// Random partition of the variables into (A, B, C, unused).
fn partition(names: &[String], labels: &[u8]) -> CiQuery {
    let pick = |l: u8| -> Vec<String> {
        names
            .iter()
            .zip(labels)
            .filter(|(_, &x)| x == l)
            .map(|(n, _)| n.clone())
            .collect()
    };
    CiQuery::new(pick(0), pick(1), pick(2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn marginalization_commutes(d in random_dist(), u in any::<u32>(), w in any::<u32>()) {
        let names = d.names();
        let outer = subset(&names, u);
        let inner = subset(&names, u & w);
        let direct = d.marginal(&inner).unwrap();
        let staged = d.marginal(&outer).unwrap().marginal(&inner).unwrap();
        prop_assert_eq!(direct.variables(), staged.variables());
        for (p, q) in direct.probabilities().iter().zip(staged.probabilities()) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn conditional_times_marginal(d in random_dist(), t in any::<u32>(), g in any::<u32>(), vals in prop::collection::vec(0usize..4, 5)) {
        let vars = d.variables().to_vec();
        let event = |mask: u32| {
            Event::from_pairs(
                vars.iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(i, v)| (v.name.clone(), vals[i] % v.cardinality)),
            )
            .unwrap()
        };
        let target = event(t & !g);
        let given = event(g);
        let pg = d.prob(&given).unwrap();
        prop_assume!(pg > 0.0);
        let joint = d.prob(&target.and(&given).unwrap()).unwrap();
        let cond = d.conditional_prob(&target, &given).unwrap();
        prop_assert!((cond * pg - joint).abs() <= 1e-12);
    }

    #[test]
    fn delta_forms_agree_and_are_symmetric(d in random_dist(), labels in prop::collection::vec(0u8..4, 5)) {
        let q = partition(&d.names(), &labels);
        let def = delta_ci(&d, &q).unwrap();
        let alt = delta_ci_alternative(&d, &q).unwrap();
        let swapped = delta_ci(&d, &CiQuery::new(q.b.clone(), q.a.clone(), q.c.clone())).unwrap();
        prop_assert!((def - alt).abs() <= 1e-12);
        prop_assert!((def - swapped).abs() <= 1e-12);
        prop_assert!(def >= 0.0);
    }

    #[test]
    fn delta_vanishes_on_conditional_products(
        cards in (1usize..=3, 1usize..=3, 1usize..=3),
        seed in any::<u64>(),
    ) {
        let (ca, cb, cc) = cards;
        let mut rng = adjustkit::rng::seeded(seed);
        let mut w = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(0.01..1.0)).collect() };
        let pc = w(cc);
        let pa = w(ca * cc);
        let pb = w(cb * cc);
        let vars = vec![VariableSpec::new("A", ca), VariableSpec::new("B", cb), VariableSpec::new("C", cc)];
        let mut weights = Vec::new();
        for a in 0..ca {
            for b in 0..cb {
                for c in 0..cc {
                    weights.push(pc[c] * pa[a * cc + c] * pb[b * cc + c]);
                }
            }
        }
        let d = JointDistribution::from_weights(vars, weights).unwrap();
        prop_assert!(delta_ci(&d, &CiQuery::new(["A"], ["B"], ["C"])).unwrap() <= 1e-12);
    }

    #[test]
    fn exact_adjustment_in_unit_interval(d in binary_dist(4), xv in 0usize..2, yv in 0usize..2) {
        let names = d.names();
        let x = Event::single(names[0].clone(), xv);
        let y = Event::single(names[1].clone(), yv);
        for s in all_subsets(&names[2..]) {
            let t = exact_adjustment(&d, &AdjustmentQuery::new(x.clone(), y.clone(), s)).unwrap();
            prop_assert!((0.0..=1.0).contains(&t));
        }
        let empty = exact_adjustment(&d, &AdjustmentQuery::new(x.clone(), y.clone(), [] as [&str; 0])).unwrap();
        prop_assert!((empty - d.conditional_prob(&y, &x).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn alpha_shrinks_on_supersets(d in random_dist(), a in any::<u32>(), b in any::<u32>(), xv in 0usize..4) {
        let names = d.names();
        prop_assume!(names.len() >= 2);
        let x = Event::single(names[0].clone(), xv % d.variables()[0].cardinality);
        let rest = &names[1..];
        let small = subset(rest, a & b);
        let big = subset(rest, a);
        prop_assert!(alpha(&d, &x, &small).unwrap() >= alpha(&d, &x, &big).unwrap() - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn amba_matches_brute_force(d in binary_dist(5), eps in prop_oneof![Just(1e-12), 0.01f64..0.2]) {
        let names = d.names();
        let x = [names[0].clone()];
        let a = names[1..].to_vec();
        let tester = CiTester::oracle(&d, eps).unwrap();
        let found = amba(&tester, &x, &a).unwrap();
        let reference = brute_force_min_blanket(&d, &x, &a, eps).unwrap();
        prop_assert_eq!(&found.chosen, &reference);
        prop_assert_eq!(found.level_reached, found.chosen.len());
    }

    #[test]
    fn bamba_output_screens(d in binary_dist(5), mask in any::<u32>()) {
        let names = d.names();
        let (x, y) = ([names[0].clone()], [names[1].clone()]);
        let a = names[2..].to_vec();
        let s = subset(&a, mask);
        let tester = CiTester::oracle(&d, 1e-12).unwrap();
        let r = bamba(&tester, &x, &y, &a, &s).unwrap();
        prop_assert!(!r.fallback_used);
        let q = AdjustmentQuery::new(Event::single(x[0].clone(), 0), Event::single(y[0].clone(), 1), s.clone());
        let t_s = exact_adjustment(&d, &q).unwrap();
        let t_sp = exact_adjustment(&d, &q.with_adjust(r.chosen.clone())).unwrap();
        prop_assert!((t_s - t_sp).abs() <= 1e-9);
    }
}

#[test]
fn misspecification_bound_over_random_binary_dists() {
    for seed in 0..500u64 {
        let vars = 4 + (seed % 2) as usize;
        let d = gallery::random(vars, 2, seed, 0.05).unwrap();
        let names = d.names();
        let x = Event::single(names[0].clone(), (seed / 2 % 2) as usize);
        let y = Event::single(names[1].clone(), 1);
        let a = names[2..].to_vec();
        let t_a = exact_adjustment(&d, &AdjustmentQuery::new(x.clone(), y.clone(), a.clone())).unwrap();
        for s in all_subsets(&a) {
            let rest: Vec<String> = a.iter().filter(|v| !s.contains(v)).cloned().collect();
            let dev = delta_ci(&d, &CiQuery::new([names[0].clone()], rest, s.clone())).unwrap();
            let t_s = exact_adjustment(&d, &AdjustmentQuery::new(x.clone(), y.clone(), s.clone())).unwrap();
            let a_s = alpha(&d, &x, &s).unwrap();
            assert!(
                (t_s - t_a).abs() <= dev / a_s + 1e-9,
                "seed {seed}, S = {s:?}: |{t_s} - {t_a}| > {dev}/{a_s}"
            );
        }
    }
}

#[test]
fn exact_blankets_preserve_the_adjustment() {
    for k in 1..=4 {
        for seed in 0..5 {
            let d = gallery::backdoor(k, seed).unwrap();
            let pa = gallery::backdoor_parents(k);
            let mut z = pa.clone();
            z.push("B".into());
            let q = AdjustmentQuery::new(Event::single("X", 1), Event::single("Y", 1), z);
            let t_z = exact_adjustment(&d, &q).unwrap();
            let t_pa = exact_adjustment(&d, &q.with_adjust(pa.clone())).unwrap();
            let t_b = exact_adjustment(&d, &q.with_adjust(["B"])).unwrap();
            assert!(delta_ci(&d, &CiQuery::new(["X"], ["B"], pa.clone())).unwrap() <= 1e-12);
            assert!((t_z - t_pa).abs() <= 1e-9);
            assert!((t_b - t_pa).abs() <= 1e-9);
        }
    }
}

fn approx(a: f64, b: f64) {
    assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
}

#[test]
fn hardness_conditional_table() {
    for (eps, al) in [(0.04, 0.4), (0.01, 0.25), (0.09, 0.5)] {
        let d = gallery::hardness(eps, al).unwrap();
        let r = f64::sqrt(eps);
        // (a, b, P(b|a), P(X=0|a,b), P(X=0|a), Σ_x |P(x|a,b) − P(x|a)|)
        let rows = [
            (0, 0, r / 2.0, 1.0 - al + r / 2.0, 1.0 - al + eps / 4.0, r - eps / 2.0),
            (0, 1, 1.0 - r / 2.0, 1.0 - al, 1.0 - al + eps / 4.0, eps / 2.0),
            (1, 0, 1.0 - r / 2.0, al, al - eps / 4.0, eps / 2.0),
            (1, 1, r / 2.0, al - r / 2.0, al - eps / 4.0, r - eps / 2.0),
        ];
        for (a, b, pb, px_ab, px_a, dev) in rows {
            let ea = Event::single("A", a);
            let eab = Event::from_pairs([("A", a), ("B", b)]).unwrap();
            approx(d.conditional_prob(&Event::single("B", b), &ea).unwrap(), pb);
            approx(d.conditional_prob(&Event::single("X", 0), &eab).unwrap(), px_ab);
            approx(d.conditional_prob(&Event::single("X", 0), &ea).unwrap(), px_a);
            let mut total = 0.0;
            for x in 0..2 {
                let ex = Event::single("X", x);
                total += (d.conditional_prob(&ex, &eab).unwrap() - d.conditional_prob(&ex, &ea).unwrap()).abs();
            }
            approx(total, dev);
        }
    }
}

#[test]
fn hardness_is_well_defined_across_its_range() {
    let mut rng = adjustkit::rng::seeded(17);
    for _ in 0..10_000 {
        let al: f64 = rng.random_range(1e-6..=0.5);
        let root: f64 = rng.random_range(0.0..=al);
        let eps = (root * root).max(f64::MIN_POSITIVE);
        let d = gallery::hardness(eps, al).unwrap();
        let p1 = d.prob(&Event::single("A", 1)).unwrap();
        assert!((0.0..=1.0).contains(&p1));
    }
}

#[test]
fn weak_edge_limit_is_independent() {
    let d = gallery::weak_edge(0.0).unwrap();
    assert!(delta_ci(&d, &CiQuery::new(["X"], ["Z"], [] as [&str; 0])).unwrap() <= 1e-15);
    for eps in [0.0, 0.2, 0.7] {
        let d = gallery::weak_edge(eps).unwrap();
        let q = AdjustmentQuery::new(Event::single("X", 0), Event::single("Y", 1), ["Z"]);
        approx(exact_adjustment(&d, &q).unwrap(), 0.5);
    }
}

#[test]
fn xor_boundary_and_pairs() {
    // joint deviation is 1 − 2ε up to ε = 1/4 and 1/2 beyond
    for (eps, joint) in [(0.05, 0.9), (0.25, 0.5), (0.4, 0.5), (0.5, 0.5)] {
        let d = gallery::xor(eps).unwrap();
        approx(delta_ci(&d, &CiQuery::new(["X"], ["A", "B"], [] as [&str; 0])).unwrap(), joint);
    }
    let d = gallery::xor(0.1).unwrap();
    let none: [&str; 0] = [];
    approx(delta_ci(&d, &CiQuery::new(["X"], ["A"], none)).unwrap(), 0.1);
    approx(delta_ci(&d, &CiQuery::new(["X"], ["B"], none)).unwrap(), 0.1);
    approx(delta_ci(&d, &CiQuery::new(["X"], ["A", "B"], none)).unwrap(), 0.8);
}

#[test]
fn hardness_true_values() {
    let (eps, al) = (0.04, 0.4);
    let d = gallery::hardness(eps, al).unwrap();
    let dev = delta_ci(&d, &CiQuery::new(["X"], ["B"], ["A"])).unwrap();
    assert!((dev - (eps - eps.powf(1.5) / 2.0)).abs() <= 1e-12);
    let x = Event::single("X", 0);
    approx(alpha(&d, &x, &["A"]).unwrap(), al - eps / 4.0);
    let q = AdjustmentQuery::new(x, Event::single("Y", 1), ["A"]);
    let gap = exact_adjustment(&d, &q).unwrap() - exact_adjustment(&d, &q.with_adjust(["A", "B"])).unwrap();
    assert!((gap.abs() - eps * eps / (16.0 * al)).abs() <= 1e-12);
}
