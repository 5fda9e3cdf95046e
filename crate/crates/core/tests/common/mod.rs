//! Random small scenarios shared by the integration tests.
#![allow(dead_code)]

use cloudfed::coalition::Coalition;
use cloudfed::coalitional::{CharacteristicTable, Game};
use cloudfed::domain::{validate_scenario, Scenario};
use cloudfed::workbench::fixtures;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// Up to `max_hosts` hosts and `max_vms` VMs per provider, random classes,
/// power states, switch and migration times; some VMs already run at their
/// owner, the rest are new arrivals.
pub fn small_scenario(rng: &mut ChaCha8Rng, providers: usize, max_hosts: u32, max_vms: u32) -> Scenario {
    let mut hosts = Vec::with_capacity(providers);
    let mut vms = Vec::with_capacity(providers);
    for _ in 0..providers {
        let mut h = [0u32; 3];
        for _ in 0..rng.random_range(1..=max_hosts) {
            h[rng.random_range(0..3)] += 1;
        }
        let mut v = [0u32; 3];
        for _ in 0..rng.random_range(0..=max_vms) {
            v[rng.random_range(0..3)] += 1;
        }
        hosts.push(h);
        vms.push(v);
    }
    let mut s = fixtures::from_counts(&hosts, &vms);
    for c in &mut s.host_classes {
        c.switch_energy_on = fixtures::switch_energy_wh(c, rng.random_range(0.0..600.0));
        c.switch_energy_off = fixtures::switch_energy_wh(c, rng.random_range(0.0..600.0));
    }
    s.migration = fixtures::experiment_migration((0..3).map(|_| rng.random_range(0.0..2000.0)).collect());
    s.planning_period_hours = if rng.random_bool(0.5) { 1.0 } else { 12.0 };
    for p in &mut s.providers {
        p.energy_price = rng.random_range(0.0002..0.0006);
        for h in &mut p.hosts {
            h.initially_on = rng.random_bool(0.5);
        }
    }
    fixtures::place_on_own_hosts(&mut s);
    for p in &mut s.providers {
        for vm in &mut p.workload {
            if rng.random_bool(0.3) {
                vm.current_host = None;
            }
        }
    }
    assert!(validate_scenario(&s).is_ok());
    s
}

/// Draws until every provider can place its own workload, which makes every
/// coalition feasible.
pub fn feasible_scenario(rng: &mut ChaCha8Rng, providers: usize, max_hosts: u32, max_vms: u32) -> Scenario {
    loop {
        let s = small_scenario(rng, providers, max_hosts, max_vms);
        let table = CharacteristicTable::new(s.clone());
        if (1..=providers as u32).all(|i| table.value(Coalition::singleton(i)).is_ok()) {
            return s;
        }
    }
}
