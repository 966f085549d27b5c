mod common;

use std::collections::BTreeSet;

use common::{brute_force_repairs, Instance, Preference};
use repairdb::frontend::{parse_problem, run, RunOutput};
use repairdb::oracle::{eval3, preferred_repairs_oracle, OracleProblem, Valuation, DEFAULT_CAP};
use repairdb::{PreferenceCriterion, RunOptions, Status};

pub const INSTANCES: u64 = 200;

fn engine(inst: &Instance, criterion: PreferenceCriterion) -> RunOutput {
    let problem = parse_problem(&inst.to_source()).unwrap();
    run(&problem, &RunOptions { criterion, ..RunOptions::default() }).unwrap()
}

fn preference(c: PreferenceCriterion) -> Preference {
    match c {
        PreferenceCriterion::Inclusion => Preference::Inclusion,
        PreferenceCriterion::Cardinality => Preference::Cardinality,
    }
}

#[test]
fn engine_repairs_restore_consistency() {
    let mut checked = 0;
    for seed in 0..INSTANCES {
        let inst = common::random_instance(&mut common::rng(seed));
        let oracle = OracleProblem::new(inst.facts.clone(), inst.constraints.clone(), false, DEFAULT_CAP).unwrap();
        for c in [PreferenceCriterion::Inclusion, PreferenceCriterion::Cardinality] {
            let out = engine(&inst, c);
            for r in &out.result.repairs {
                assert!(r.is_ground(), "seed {seed}: {r}");
                assert!(r.retract.is_subset(&inst.facts) && r.insert.is_disjoint(&inst.facts), "seed {seed}: {r}");
                let repaired = common::apply(&inst.facts, &r.insert, &r.retract);
                assert!(inst.satisfied_by(&repaired), "seed {seed}: {r} leaves a violation");
                let v = Valuation::two_valued(&oracle.universe, oracle.universe.mask_of(&repaired));
                assert!(
                    inst.constraints.iter().all(|f| eval3(&oracle.universe, &v, f).designated()),
                    "seed {seed}: {r}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked > INSTANCES as usize);
}

#[test]
fn engine_matches_exhaustive_search() {
    let mut complete = 0;
    for seed in 0..INSTANCES {
        let inst = common::random_instance(&mut common::rng(seed));
        let oracle = OracleProblem::new(inst.facts.clone(), inst.constraints.clone(), false, DEFAULT_CAP).unwrap();
        for c in [PreferenceCriterion::Inclusion, PreferenceCriterion::Cardinality] {
            let expected = brute_force_repairs(&inst, preference(c));
            let models: BTreeSet<String> = preferred_repairs_oracle(&oracle, c)
                .unwrap()
                .iter()
                .map(|r| common::render(&r.insert, &r.retract))
                .collect();
            assert_eq!(models, expected, "seed {seed} {c}: oracle");
            let out = engine(&inst, c);
            if out.result.status != Status::Complete {
                continue;
            }
            complete += 1;
            assert_eq!(out.report.rendered(), expected, "seed {seed} {c}:\n{}", inst.to_source());
        }
    }
    assert_eq!(complete, 2 * INSTANCES);
}

#[test]
fn generator_respects_size_limits() {
    for seed in 0..INSTANCES {
        let inst = common::random_instance(&mut common::rng(seed));
        assert!(inst.active_domain().len() <= 4);
        assert!(inst.signature.len() <= 3);
        assert!(inst.universe().len() <= common::MAX_UNIVERSE);
        assert!((1..=3).contains(&inst.constraints.len()));
    }
}
