//! Built-in scenarios: the two motivating scenarios, the empty-core example
//! and the four-provider case study.

use crate::domain::{
    Host, HostClass, MigrationParams, Provider, Scenario, ShareMatrix, Vm, VmClass,
    DEFAULT_PLANNING_PERIOD_HOURS,
};

/// 0.4 $/kWh.
pub const ENERGY_PRICE_PER_WH: f64 = 0.0004;

/// Host inventories of the four experiment providers (class 1, 2, 3).
pub const EXPERIMENT_HOSTS: [[u32; 3]; 4] = [[40, 0, 0], [0, 40, 0], [0, 0, 40], [15, 15, 10]];

/// Case-study workloads (class 1, 2, 3 VMs per provider).
pub const CASE_STUDY_VMS: [[u32; 3]; 4] = [[0, 12, 13], [18, 5, 11], [17, 18, 11], [3, 2, 0]];

/// Mean switch-on/off time, seconds.
pub const MEAN_SWITCH_TIME_S: f64 = 300e-6;

/// Mean migration time per VM class, seconds.
pub const MEAN_MIGRATION_TIME_S: [f64; 3] = [277.0, 554.0, 1108.0];

pub const TRANSFER_COST_PER_GB: f64 = 0.001;
pub const DATA_RATE_MBIT_S: f64 = 100.0;

pub fn host_classes() -> Vec<HostClass> {
    let class = |id, cpu, ram, c_min, c_max| HostClass {
        id,
        cpu_capacity: cpu,
        ram_gb: ram,
        c_min,
        c_max,
        switch_energy_on: 0.0,
        switch_energy_off: 0.0,
    };
    vec![
        class(1, 5000.0, 16.0, 86.7, 274.9),
        class(2, 6667.0, 32.0, 143.0, 518.4),
        class(3, 10000.0, 64.0, 490.1, 1117.8),
    ]
}

pub fn vm_classes() -> Vec<VmClass> {
    let class = |id, cpu, ram, revenue_rate| VmClass {
        id,
        cpu_capacity: cpu,
        ram_gb: ram,
        revenue_rate,
    };
    vec![
        class(1, 1000.0, 1.0, 0.08),
        class(2, 2000.0, 2.0, 0.16),
        class(3, 4000.0, 4.0, 0.32),
    ]
}

/// Per-VM shares, rows by VM class, columns by host class.
pub fn shares() -> ShareMatrix {
    ShareMatrix {
        cpu: vec![vec![0.20, 0.15, 0.10], vec![0.4, 0.3, 0.2], vec![0.8, 0.6, 0.3]],
        ram: vec![
            vec![0.0625, 0.03125, 0.015625],
            vec![0.125, 0.0625, 0.03125],
            vec![0.25, 0.125, 0.0625],
        ],
    }
}

/// Providers with the given per-class host and VM counts; every host starts
/// on, no VM has a current host, and migration is free.
pub fn from_counts(hosts: &[[u32; 3]], vms: &[[u32; 3]]) -> Scenario {
    assert_eq!(hosts.len(), vms.len());
    let mut next_host = 1;
    let mut next_vm = 1;
    let providers = hosts
        .iter()
        .zip(vms)
        .enumerate()
        .map(|(k, (hc, vc))| {
            let id = k as u32 + 1;
            let mut p = Provider {
                id,
                energy_price: ENERGY_PRICE_PER_WH,
                hosts: Vec::new(),
                workload: Vec::new(),
            };
            for (g, &count) in hc.iter().enumerate() {
                for _ in 0..count {
                    p.hosts.push(Host {
                        id: next_host,
                        class: g as u32 + 1,
                        owner: id,
                        initially_on: true,
                    });
                    next_host += 1;
                }
            }
            for (q, &count) in vc.iter().enumerate() {
                for _ in 0..count {
                    p.workload.push(Vm {
                        id: next_vm,
                        class: q as u32 + 1,
                        owner: id,
                        current_host: None,
                    });
                    next_vm += 1;
                }
            }
            p
        })
        .collect();
    Scenario {
        host_classes: host_classes(),
        vm_classes: vm_classes(),
        shares: Some(shares()),
        providers,
        migration: MigrationParams::free(3),
        planning_period_hours: DEFAULT_PLANNING_PERIOD_HOURS,
    }
}

/// Three providers with 30 hosts of class 1, 2 and 3 respectively, each
/// running ten class-3 VMs.
pub fn scenario1() -> Scenario {
    from_counts(
        &[[30, 0, 0], [0, 30, 0], [0, 0, 30]],
        &[[0, 0, 10], [0, 0, 10], [0, 0, 10]],
    )
}

/// Provider 1: 42 class-2 hosts and 65 class-2 VMs; providers 2 and 3: 41
/// class-3 hosts and 61 class-2 VMs each.
pub fn scenario2() -> Scenario {
    from_counts(
        &[[0, 42, 0], [0, 0, 41], [0, 0, 41]],
        &[[0, 65, 0], [0, 61, 0], [0, 61, 0]],
    )
}

/// Three-provider game whose core is empty.
pub fn appendix() -> Scenario {
    from_counts(
        &[[0, 2, 0], [1, 0, 0], [1, 0, 0]],
        &[[0, 4, 0], [0, 1, 0], [0, 1, 0]],
    )
}

/// Switch energy (Wh) of a host class for a given switch time.
pub fn switch_energy_wh(class: &HostClass, seconds: f64) -> f64 {
    class.c_max * seconds / 3600.0
}

pub fn experiment_migration(times_s: Vec<f64>) -> MigrationParams {
    MigrationParams {
        transfer_cost_per_gb: TRANSFER_COST_PER_GB,
        data_rate_mbit_s: DATA_RATE_MBIT_S,
        migration_time_s: times_s,
        same_cp_cost: 0.0,
    }
}

/// Spreads each provider's VMs round-robin over its own hosts.
pub fn place_on_own_hosts(s: &mut Scenario) {
    for p in &mut s.providers {
        if p.hosts.is_empty() {
            continue;
        }
        for (k, vm) in p.workload.iter_mut().enumerate() {
            vm.current_host = Some(p.hosts[k % p.hosts.len()].id);
        }
    }
}

/// Planning period of the case study. Migration and switch costs are charged
/// in full every hour; amortising them over twelve hours leaves every
/// federated coalition about 0.25 $/h above the published values.
pub const CASE_STUDY_PLANNING_PERIOD_HOURS: f64 = 1.0;

/// The four-provider case study: experiment inventories, the printed
/// workloads, every host on, mean switch and migration times, and every VM
/// currently running at its owner.
pub fn case_study() -> Scenario {
    let mut s = from_counts(&EXPERIMENT_HOSTS, &CASE_STUDY_VMS);
    for c in &mut s.host_classes {
        let e = switch_energy_wh(c, MEAN_SWITCH_TIME_S);
        c.switch_energy_on = e;
        c.switch_energy_off = e;
    }
    s.migration = experiment_migration(MEAN_MIGRATION_TIME_S.to_vec());
    s.planning_period_hours = CASE_STUDY_PLANNING_PERIOD_HOURS;
    place_on_own_hosts(&mut s);
    s
}
