//! Hosts, VMs, providers and the closed-form power and share model.
//!
//! Units are fixed throughout the crate: power in watts, energy in watt-hours,
//! energy prices in currency per watt-hour (0.4 $/kWh is `0.0004`), revenue and
//! costs in currency per hour.

mod file;
mod validate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use file::{load_scenario, HostEntry, ProviderEntry, ScenarioFile, VmEntry};
pub use validate::{validate_scenario, Issue, ValidationReport};

pub type ProviderId = u32;
pub type HostId = u32;
pub type VmId = u32;
pub type ClassId = u32;

/// Shares above `1 + SHARE_TOLERANCE` do not fit. The slack absorbs rounding in
/// sums such as `0.2 + 0.4 + 0.4`.
pub const SHARE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostClass {
    pub id: ClassId,
    /// Benchmark capacity of the physical processor.
    pub cpu_capacity: f64,
    pub ram_gb: f64,
    /// Idle power draw (W).
    pub c_min: f64,
    /// Full-load power draw (W).
    pub c_max: f64,
    /// Energy spent switching a host on (Wh).
    #[serde(default)]
    pub switch_energy_on: f64,
    /// Energy spent switching a host off (Wh).
    #[serde(default)]
    pub switch_energy_off: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmClass {
    pub id: ClassId,
    /// Benchmark capacity of the virtual processor.
    pub cpu_capacity: f64,
    pub ram_gb: f64,
    /// Currency per hour paid by the VM owner.
    pub revenue_rate: f64,
}

/// Explicit per-(VM class, host class) resource shares, indexed by class
/// position: `cpu[q][g]` is the CPU fraction a VM of the `q`-th VM class uses on
/// a host of the `g`-th host class. Entries above 1 mark pairs that never fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareMatrix {
    pub cpu: Vec<Vec<f64>>,
    pub ram: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Host {
    pub id: HostId,
    pub class: ClassId,
    pub owner: ProviderId,
    pub initially_on: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vm {
    pub id: VmId,
    pub class: ClassId,
    pub owner: ProviderId,
    pub current_host: Option<HostId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provider {
    pub id: ProviderId,
    /// Currency per watt-hour.
    pub energy_price: f64,
    pub hosts: Vec<Host>,
    pub workload: Vec<Vm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationParams {
    pub transfer_cost_per_gb: f64,
    pub data_rate_mbit_s: f64,
    /// Seconds to migrate one VM, indexed by VM class position.
    pub migration_time_s: Vec<f64>,
    /// Currency per hour for moving a VM between hosts of the same provider.
    #[serde(default)]
    pub same_cp_cost: f64,
}

impl MigrationParams {
    /// No migration cost at all.
    pub fn free(vm_classes: usize) -> Self {
        MigrationParams {
            transfer_cost_per_gb: 0.0,
            data_rate_mbit_s: 0.0,
            migration_time_s: vec![0.0; vm_classes],
            same_cp_cost: 0.0,
        }
    }

    /// Gigabytes moved while migrating one VM of class position `q`.
    pub fn data_size_gb(&self, q: usize) -> f64 {
        self.data_rate_mbit_s * self.migration_time_s.get(q).copied().unwrap_or(0.0) / 8000.0
    }

    /// Hourly cost of moving a VM of class position `q` from provider `from` to
    /// provider `to`, amortised over `planning_hours`. Zero when the VM has no
    /// current placement.
    pub fn hourly_rate(
        &self,
        q: usize,
        from: Option<ProviderId>,
        to: ProviderId,
        planning_hours: f64,
    ) -> f64 {
        match from {
            None => 0.0,
            Some(c) if c == to => self.same_cp_cost,
            Some(_) => self.transfer_cost_per_gb * self.data_size_gb(q) / planning_hours,
        }
    }
}

pub const DEFAULT_PLANNING_PERIOD_HOURS: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub host_classes: Vec<HostClass>,
    pub vm_classes: Vec<VmClass>,
    /// Explicit shares; when absent they are derived from capacities.
    pub shares: Option<ShareMatrix>,
    pub providers: Vec<Provider>,
    pub migration: MigrationParams,
    pub planning_period_hours: f64,
}

impl Scenario {
    pub fn provider_count(&self) -> usize {
        self.providers.len()
    }

    pub fn provider(&self, id: ProviderId) -> Option<&Provider> {
        self.providers.iter().find(|p| p.id == id)
    }

    pub fn host_class_index(&self, id: ClassId) -> Option<usize> {
        self.host_classes.iter().position(|c| c.id == id)
    }

    pub fn vm_class_index(&self, id: ClassId) -> Option<usize> {
        self.vm_classes.iter().position(|c| c.id == id)
    }

    pub fn hosts(&self) -> impl Iterator<Item = &Host> {
        self.providers.iter().flat_map(|p| p.hosts.iter())
    }

    pub fn vms(&self) -> impl Iterator<Item = &Vm> {
        self.providers.iter().flat_map(|p| p.workload.iter())
    }

    pub fn host(&self, id: HostId) -> Option<&Host> {
        self.hosts().find(|h| h.id == id)
    }

    /// (CPU, RAM) share of VM class position `q` on host class position `g`:
    /// the explicit matrix entry when present, the capacity ratio otherwise.
    pub fn shares(&self, q: usize, g: usize) -> (f64, f64) {
        if let Some(m) = &self.shares {
            if let (Some(c), Some(r)) = (
                m.cpu.get(q).and_then(|row| row.get(g)),
                m.ram.get(q).and_then(|row| row.get(g)),
            ) {
                return (*c, *r);
            }
        }
        let v = &self.vm_classes[q];
        let h = &self.host_classes[g];
        (v.cpu_capacity / h.cpu_capacity, v.ram_gb / h.ram_gb)
    }

    /// Revenue per hour of the whole workload of provider `id`.
    pub fn revenue_rate(&self, id: ProviderId) -> f64 {
        self.provider(id)
            .map(|p| {
                p.workload
                    .iter()
                    .map(|vm| {
                        self.vm_class_index(vm.class)
                            .map_or(0.0, |q| self.vm_classes[q].revenue_rate)
                    })
                    .sum()
            })
            .unwrap_or(0.0)
    }
}

/// Power draw in watts of a host of class `class` running at CPU utilisation
/// `utilization`: `c_min + f (c_max - c_min)`.
pub fn power_draw(class: &HostClass, utilization: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&utilization) {
        return Err(Error::Domain(format!("utilization {utilization} outside [0, 1]")));
    }
    Ok(class.c_min + utilization * (class.c_max - class.c_min))
}

/// Fraction of a host's CPU one VM of `vm` uses: `Cap_v / Cap_p`.
pub fn cpu_share(vm: &VmClass, host: &HostClass) -> Result<f64> {
    if host.cpu_capacity <= 0.0 {
        return Err(Error::Domain(format!(
            "host class {} has nonpositive CPU capacity",
            host.id
        )));
    }
    let share = vm.cpu_capacity / host.cpu_capacity;
    if share > 1.0 {
        return Err(Error::InfeasibleClass {
            vm_class: vm.id,
            host_class: host.id,
            resource: "cpu",
            share,
        });
    }
    Ok(share)
}

/// Fraction of a host's memory one VM of `vm` uses: `RAM_q / RAM_g`.
pub fn ram_share(vm: &VmClass, host: &HostClass) -> Result<f64> {
    if host.ram_gb <= 0.0 {
        return Err(Error::Domain(format!(
            "host class {} has nonpositive RAM",
            host.id
        )));
    }
    let share = vm.ram_gb / host.ram_gb;
    if share > 1.0 {
        return Err(Error::InfeasibleClass {
            vm_class: vm.id,
            host_class: host.id,
            resource: "ram",
            share,
        });
    }
    Ok(share)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn class1() -> HostClass {
        HostClass {
            id: 1,
            cpu_capacity: 5000.0,
            ram_gb: 16.0,
            c_min: 86.7,
            c_max: 274.9,
            switch_energy_on: 0.0,
            switch_energy_off: 0.0,
        }
    }

    fn vm(cpu: f64, ram: f64) -> VmClass {
        VmClass {
            id: 9,
            cpu_capacity: cpu,
            ram_gb: ram,
            revenue_rate: 0.1,
        }
    }

    fn host(cpu: f64, ram: f64) -> HostClass {
        HostClass {
            cpu_capacity: cpu,
            ram_gb: ram,
            ..class1()
        }
    }

    #[test]
    fn power_draw_endpoints_and_interior() {
        assert_relative_eq!(power_draw(&class1(), 0.0).unwrap(), 86.7);
        assert_relative_eq!(power_draw(&class1(), 1.0).unwrap(), 274.9);
        assert_relative_eq!(power_draw(&class1(), 0.8).unwrap(), 237.26, max_relative = 1e-12);
        // ten hosts at 0.8 load: 2.37 kW
        assert!((10.0 * power_draw(&class1(), 0.8).unwrap() / 1000.0 - 2.37).abs() < 0.005);
    }

    #[test]
    fn power_draw_rejects_out_of_range() {
        assert!(matches!(power_draw(&class1(), -0.1), Err(Error::Domain(_))));
        assert!(matches!(power_draw(&class1(), 1.01), Err(Error::Domain(_))));
    }

    #[test]
    fn share_examples() {
        assert_eq!(cpu_share(&vm(1000.0, 1.0), &host(8000.0, 16.0)).unwrap(), 0.125);
        assert_eq!(cpu_share(&vm(8000.0, 1.0), &host(8000.0, 16.0)).unwrap(), 1.0);
        // class-3 VM (4000) on class-1 host (5000)
        assert_relative_eq!(cpu_share(&vm(4000.0, 4.0), &class1()).unwrap(), 0.8);
        assert_eq!(ram_share(&vm(1.0, 4.0), &host(1.0, 64.0)).unwrap(), 0.0625);
        assert_eq!(ram_share(&vm(1.0, 1.0), &host(1.0, 16.0)).unwrap(), 0.0625);
        assert_eq!(ram_share(&vm(1.0, 16.0), &host(1.0, 16.0)).unwrap(), 1.0);
    }

    #[test]
    fn oversize_vm_is_infeasible() {
        assert!(matches!(
            cpu_share(&vm(9000.0, 1.0), &host(8000.0, 16.0)),
            Err(Error::InfeasibleClass { resource: "cpu", .. })
        ));
        assert!(matches!(
            ram_share(&vm(1.0, 32.0), &host(8000.0, 16.0)),
            Err(Error::InfeasibleClass { resource: "ram", .. })
        ));
    }

    #[test]
    fn migration_rate_formula() {
        let m = MigrationParams {
            transfer_cost_per_gb: 0.001,
            data_rate_mbit_s: 100.0,
            migration_time_s: vec![277.0, 554.0, 1108.0],
            same_cp_cost: 0.0,
        };
        // 100 Mbit/s for 554 s = 6.925 GB; 0.001 $/GB over 12 h
        assert_relative_eq!(m.hourly_rate(1, Some(1), 2, 12.0), 0.006925 / 12.0);
        assert_eq!(m.hourly_rate(1, Some(2), 2, 12.0), 0.0);
        assert_eq!(m.hourly_rate(1, None, 2, 12.0), 0.0);
    }

    proptest! {
        #[test]
        fn power_draw_is_linear(f in 0.0f64..=1.0, cmin in 1.0f64..500.0, extra in 1.0f64..800.0) {
            let c = HostClass { c_min: cmin, c_max: cmin + extra, ..class1() };
            let p = power_draw(&c, f).unwrap();
            prop_assert!((p - ((1.0 - f) * c.c_min + f * c.c_max)).abs() < 1e-9);
            let g = (f + 0.1).min(1.0);
            prop_assert!(power_draw(&c, g).unwrap() >= p);
        }

        #[test]
        fn cpu_share_is_scale_consistent(v in 1.0f64..1000.0, p in 1000.0f64..10_000.0) {
            let a = cpu_share(&vm(v, 1.0), &host(p, 16.0)).unwrap();
            let b = cpu_share(&vm(2.0 * v, 1.0), &host(2.0 * p, 16.0)).unwrap();
            prop_assert!((a - b).abs() < 1e-15);
        }
    }
}
