//! On-disk scenario documents (TOML or JSON).
//!
//! Host and VM entries carry a `count` that expands to individuals. Ids are
//! assigned sequentially from 1 across providers in file order, hosts and VMs
//! numbered independently, so the same file always yields the same ids.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Host, HostClass, HostId, MigrationParams, Provider, ProviderId, Scenario, ShareMatrix, Vm, VmClass,
    DEFAULT_PLANNING_PERIOD_HOURS,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub host_classes: Vec<HostClass>,
    pub vm_classes: Vec<VmClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shares: Option<ShareMatrix>,
    pub providers: Vec<ProviderEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub migration: Option<MigrationParams>,
    #[serde(default = "default_planning")]
    pub planning_period_hours: f64,
}

fn default_planning() -> f64 {
    DEFAULT_PLANNING_PERIOD_HOURS
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderEntry {
    /// Defaults to the 1-based position in the list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<ProviderId>,
    /// Currency per watt-hour.
    pub energy_price: f64,
    #[serde(default)]
    pub hosts: Vec<HostEntry>,
    #[serde(default)]
    pub vms: Vec<VmEntry>,
}

/// `count` hosts of `class`, all in power state `initially_on`, or one host per
/// element of `power_states` when that list is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostEntry {
    pub class: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
    #[serde(default = "default_true")]
    pub initially_on: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_states: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VmEntry {
    pub class: u32,
    #[serde(default = "default_count")]
    pub count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_host: Option<HostId>,
}

fn default_count() -> u32 {
    1
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        let mut next_host = 1;
        let mut next_vm = 1;
        let mut providers = Vec::with_capacity(self.providers.len());
        for (k, entry) in self.providers.into_iter().enumerate() {
            let id = entry.id.unwrap_or(k as ProviderId + 1);
            let mut hosts = Vec::new();
            for h in entry.hosts {
                let states = match (&h.power_states, h.count) {
                    (Some(states), None) => states.clone(),
                    (Some(states), Some(c)) if c as usize == states.len() => states.clone(),
                    (Some(_), Some(_)) => {
                        return Err(Error::Parse(format!(
                            "provider {id}: host entry count disagrees with power_states"
                        )))
                    }
                    (None, c) => vec![h.initially_on; c.unwrap_or(1) as usize],
                };
                for on in states {
                    hosts.push(Host {
                        id: next_host,
                        class: h.class,
                        owner: id,
                        initially_on: on,
                    });
                    next_host += 1;
                }
            }
            let mut workload = Vec::new();
            for v in entry.vms {
                for _ in 0..v.count {
                    workload.push(Vm {
                        id: next_vm,
                        class: v.class,
                        owner: id,
                        current_host: v.current_host,
                    });
                    next_vm += 1;
                }
            }
            providers.push(Provider {
                id,
                energy_price: entry.energy_price,
                hosts,
                workload,
            });
        }
        let migration = self
            .migration
            .unwrap_or_else(|| MigrationParams::free(self.vm_classes.len()));
        Ok(Scenario {
            host_classes: self.host_classes,
            vm_classes: self.vm_classes,
            shares: self.shares,
            providers,
            migration,
            planning_period_hours: self.planning_period_hours,
        })
    }

    /// Writes every host and VM individually, so that reloading reproduces
    /// the scenario exactly when its ids are sequential.
    pub fn from_scenario(s: &Scenario) -> Self {
        let providers = s
            .providers
            .iter()
            .map(|p| ProviderEntry {
                id: Some(p.id),
                energy_price: p.energy_price,
                hosts: compress_hosts(&p.hosts),
                vms: compress_vms(&p.workload),
            })
            .collect();
        ScenarioFile {
            host_classes: s.host_classes.clone(),
            vm_classes: s.vm_classes.clone(),
            shares: s.shares.clone(),
            providers,
            migration: Some(s.migration.clone()),
            planning_period_hours: s.planning_period_hours,
        }
    }

    pub fn parse(text: &str, json: bool) -> Result<Self> {
        if json {
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn compress_hosts(hosts: &[Host]) -> Vec<HostEntry> {
    let mut out: Vec<HostEntry> = Vec::new();
    for h in hosts {
        match out.last_mut() {
            Some(last) if last.class == h.class => {
                last.power_states
                    .get_or_insert_with(Vec::new)
                    .push(h.initially_on);
            }
            _ => out.push(HostEntry {
                class: h.class,
                count: None,
                initially_on: true,
                power_states: Some(vec![h.initially_on]),
            }),
        }
    }
    out
}

fn compress_vms(vms: &[Vm]) -> Vec<VmEntry> {
    let mut out: Vec<VmEntry> = Vec::new();
    for v in vms {
        match out.last_mut() {
            Some(last) if last.class == v.class && last.current_host == v.current_host => {
                last.count += 1;
            }
            _ => out.push(VmEntry {
                class: v.class,
                count: 1,
                current_host: v.current_host,
            }),
        }
    }
    out
}

/// Loads a scenario; `.json` files are read as JSON, anything else as TOML.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    ScenarioFile::parse(&text, json)?.into_scenario()
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        load_scenario(path)
    }
}
