use std::collections::BTreeSet;
use std::fmt;

use super::{ClassId, HostId, ProviderId, Scenario, VmId, SHARE_TOLERANCE};

/// One broken scenario invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    BadHostClass {
        class: ClassId,
        reason: String,
    },
    BadVmClass {
        class: ClassId,
        reason: String,
    },
    DuplicateClass {
        kind: &'static str,
        class: ClassId,
    },
    ShareMatrixShape,
    NegativeShare {
        vm_class: ClassId,
        host_class: ClassId,
    },
    /// The VM class exceeds CPU or RAM of every host class.
    InfeasibleVmClass {
        vm_class: ClassId,
    },
    ProviderIdGap {
        expected: ProviderId,
        found: ProviderId,
    },
    DuplicateProvider {
        provider: ProviderId,
    },
    NegativeEnergyPrice {
        provider: ProviderId,
    },
    UnknownHostClass {
        host: HostId,
        class: ClassId,
    },
    UnknownVmClass {
        vm: VmId,
        class: ClassId,
    },
    WrongOwner {
        kind: &'static str,
        id: u32,
        owner: ProviderId,
        provider: ProviderId,
    },
    DuplicateHost {
        host: HostId,
    },
    DuplicateVm {
        vm: VmId,
    },
    DanglingCurrentHost {
        vm: VmId,
        host: HostId,
    },
    BadMigration {
        reason: String,
    },
    BadPlanningPeriod,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::BadHostClass { class, reason } => write!(f, "host class {class}: {reason}"),
            Issue::BadVmClass { class, reason } => write!(f, "VM class {class}: {reason}"),
            Issue::DuplicateClass { kind, class } => write!(f, "duplicate {kind} class id {class}"),
            Issue::ShareMatrixShape => {
                write!(f, "share matrix must be (#VM classes) x (#host classes)")
            }
            Issue::NegativeShare { vm_class, host_class } => write!(
                f,
                "share of VM class {vm_class} on host class {host_class} is negative or not finite"
            ),
            Issue::InfeasibleVmClass { vm_class } => {
                write!(f, "VM class {vm_class} does not fit on any host class")
            }
            Issue::ProviderIdGap { expected, found } => {
                write!(
                    f,
                    "provider ids must be 1..n without gaps: expected {expected}, found {found}"
                )
            }
            Issue::DuplicateProvider { provider } => write!(f, "duplicate provider id {provider}"),
            Issue::NegativeEnergyPrice { provider } => {
                write!(f, "provider {provider} has a negative energy price")
            }
            Issue::UnknownHostClass { host, class } => {
                write!(f, "host {host} references unknown host class {class}")
            }
            Issue::UnknownVmClass { vm, class } => {
                write!(f, "VM {vm} references unknown VM class {class}")
            }
            Issue::WrongOwner {
                kind,
                id,
                owner,
                provider,
            } => write!(
                f,
                "{kind} {id} lists owner {owner} but belongs to provider {provider}"
            ),
            Issue::DuplicateHost { host } => write!(f, "duplicate host id {host}"),
            Issue::DuplicateVm { vm } => write!(f, "duplicate VM id {vm}"),
            Issue::DanglingCurrentHost { vm, host } => {
                write!(f, "VM {vm} is currently on unknown host {host}")
            }
            Issue::BadMigration { reason } => write!(f, "migration parameters: {reason}"),
            Issue::BadPlanningPeriod => write!(f, "planning period must be positive"),
        }
    }
}

/// Every broken invariant of a scenario; empty iff the scenario is usable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "- {issue}")?;
        }
        Ok(())
    }
}

fn finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let mut issues = Vec::new();

    let mut ids = BTreeSet::new();
    for c in &s.host_classes {
        if !ids.insert(c.id) {
            issues.push(Issue::DuplicateClass {
                kind: "host",
                class: c.id,
            });
        }
        let bad = |reason: &str| Issue::BadHostClass {
            class: c.id,
            reason: reason.to_string(),
        };
        if !(c.cpu_capacity.is_finite() && c.cpu_capacity > 0.0) {
            issues.push(bad("cpu_capacity must be positive"));
        }
        if !(c.ram_gb.is_finite() && c.ram_gb > 0.0) {
            issues.push(bad("ram_gb must be positive"));
        }
        if !(c.c_min > 0.0 && c.c_min < c.c_max && c.c_max.is_finite()) {
            issues.push(bad("requires 0 < c_min < c_max"));
        }
        if !finite_nonneg(c.switch_energy_on) || !finite_nonneg(c.switch_energy_off) {
            issues.push(bad("switch energies must be nonnegative"));
        }
    }

    let mut ids = BTreeSet::new();
    for c in &s.vm_classes {
        if !ids.insert(c.id) {
            issues.push(Issue::DuplicateClass {
                kind: "VM",
                class: c.id,
            });
        }
        let bad = |reason: &str| Issue::BadVmClass {
            class: c.id,
            reason: reason.to_string(),
        };
        if !(c.cpu_capacity.is_finite() && c.cpu_capacity > 0.0) {
            issues.push(bad("cpu_capacity must be positive"));
        }
        if !(c.ram_gb.is_finite() && c.ram_gb > 0.0) {
            issues.push(bad("ram_gb must be positive"));
        }
        if !finite_nonneg(c.revenue_rate) {
            issues.push(bad("revenue_rate must be nonnegative"));
        }
    }

    let shape_ok = match &s.shares {
        None => true,
        Some(m) => {
            let ok = |rows: &Vec<Vec<f64>>| {
                rows.len() == s.vm_classes.len() && rows.iter().all(|r| r.len() == s.host_classes.len())
            };
            ok(&m.cpu) && ok(&m.ram)
        }
    };
    if !shape_ok {
        issues.push(Issue::ShareMatrixShape);
    }
    let classes_ok = s
        .host_classes
        .iter()
        .all(|c| c.cpu_capacity > 0.0 && c.ram_gb > 0.0);
    if shape_ok && classes_ok {
        for (q, vc) in s.vm_classes.iter().enumerate() {
            let mut fits_somewhere = false;
            for (g, hc) in s.host_classes.iter().enumerate() {
                let (a, m) = s.shares(q, g);
                if !finite_nonneg(a) || !finite_nonneg(m) {
                    issues.push(Issue::NegativeShare {
                        vm_class: vc.id,
                        host_class: hc.id,
                    });
                }
                if a <= 1.0 + SHARE_TOLERANCE && m <= 1.0 + SHARE_TOLERANCE {
                    fits_somewhere = true;
                }
            }
            if !fits_somewhere {
                issues.push(Issue::InfeasibleVmClass { vm_class: vc.id });
            }
        }
    }

    let mut provider_ids: Vec<ProviderId> = s.providers.iter().map(|p| p.id).collect();
    provider_ids.sort_unstable();
    for w in provider_ids.windows(2) {
        if w[0] == w[1] {
            issues.push(Issue::DuplicateProvider { provider: w[0] });
        }
    }
    provider_ids.dedup();
    for (k, id) in provider_ids.iter().enumerate() {
        let expected = k as ProviderId + 1;
        if *id != expected {
            issues.push(Issue::ProviderIdGap { expected, found: *id });
            break;
        }
    }

    let mut host_ids = BTreeSet::new();
    for p in &s.providers {
        if !finite_nonneg(p.energy_price) {
            issues.push(Issue::NegativeEnergyPrice { provider: p.id });
        }
        for h in &p.hosts {
            if !host_ids.insert(h.id) {
                issues.push(Issue::DuplicateHost { host: h.id });
            }
            if s.host_class_index(h.class).is_none() {
                issues.push(Issue::UnknownHostClass {
                    host: h.id,
                    class: h.class,
                });
            }
            if h.owner != p.id {
                issues.push(Issue::WrongOwner {
                    kind: "host",
                    id: h.id,
                    owner: h.owner,
                    provider: p.id,
                });
            }
        }
    }

    let mut vm_ids = BTreeSet::new();
    for p in &s.providers {
        for vm in &p.workload {
            if !vm_ids.insert(vm.id) {
                issues.push(Issue::DuplicateVm { vm: vm.id });
            }
            if s.vm_class_index(vm.class).is_none() {
                issues.push(Issue::UnknownVmClass {
                    vm: vm.id,
                    class: vm.class,
                });
            }
            if vm.owner != p.id {
                issues.push(Issue::WrongOwner {
                    kind: "VM",
                    id: vm.id,
                    owner: vm.owner,
                    provider: p.id,
                });
            }
            if let Some(h) = vm.current_host {
                if !host_ids.contains(&h) {
                    issues.push(Issue::DanglingCurrentHost { vm: vm.id, host: h });
                }
            }
        }
    }

    let m = &s.migration;
    if !finite_nonneg(m.transfer_cost_per_gb)
        || !finite_nonneg(m.data_rate_mbit_s)
        || !finite_nonneg(m.same_cp_cost)
        || !m.migration_time_s.iter().all(|t| finite_nonneg(*t))
    {
        issues.push(Issue::BadMigration {
            reason: "all values must be nonnegative".into(),
        });
    }
    if m.migration_time_s.len() != s.vm_classes.len() {
        issues.push(Issue::BadMigration {
            reason: format!(
                "{} migration times for {} VM classes",
                m.migration_time_s.len(),
                s.vm_classes.len()
            ),
        });
    }
    if !(s.planning_period_hours.is_finite() && s.planning_period_hours > 0.0) {
        issues.push(Issue::BadPlanningPeriod);
    }

    ValidationReport { issues }
}
