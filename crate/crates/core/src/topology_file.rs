//! JSON topology documents.
//!
//! ```json
//! {
//!   "beta": 0.8,
//!   "nodes": [
//!     {"id": 1, "role": "elid", "D_lambda": 100000000, "rho": 1},
//!     {"id": 2, "role": "elid", "d": 5, "f_scan": 10, "V_scan": 1000, "gamma": 0.1},
//!     {"id": 3, "role": "router"},
//!     {"id": 4, "role": "mec", "M": 1e9, "omega": 2.5e8},
//!     {"id": 5, "role": "cloud", "M": 2.56e11, "omega": 5.5e10}
//!   ],
//!   "links": [{"i": 1, "j": 3, "R": 1e9}]
//! }
//! ```
//!
//! Sizes are bytes and rates bytes/second. A sensor gives either `D_lambda`
//! directly or the scan parameters `d`, `f_scan`, `V_scan`, `gamma`; `rho`
//! defaults to the sensor's 1-based position among sensors.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ElidParams, Link, Node, NodeId, Role, ServerParams, Topology};
use crate::scan::{data_rate, ScanProfile};

#[derive(Debug, Error)]
pub enum TopologyFileError {
    #[error("{0}")]
    Syntax(#[from] serde_json::Error),
    #[error("{location}: {message}")]
    Semantic { location: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn semantic(location: impl Into<String>, message: impl Into<String>) -> TopologyFileError {
    TopologyFileError::Semantic {
        location: location.into(),
        message: message.into(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyDoc {
    beta: f64,
    nodes: Vec<NodeDoc>,
    links: Vec<LinkDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "lowercase", deny_unknown_fields)]
enum NodeDoc {
    Elid {
        id: u32,
        #[serde(rename = "D_lambda", default, skip_serializing_if = "Option::is_none")]
        data_rate: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        f_scan: Option<f64>,
        #[serde(rename = "V_scan", default, skip_serializing_if = "Option::is_none")]
        v_scan: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rho: Option<f64>,
    },
    Router {
        id: u32,
    },
    Mec {
        id: u32,
        #[serde(rename = "M")]
        ram: f64,
        omega: f64,
    },
    Cloud {
        id: u32,
        #[serde(rename = "M")]
        ram: f64,
        omega: f64,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    i: u32,
    j: u32,
    #[serde(rename = "R")]
    bandwidth: f64,
}

fn whole_bytes(value: f64, location: &str, field: &str) -> Result<u64, TopologyFileError> {
    if !value.is_finite() || value < 0.0 || value >= u64::MAX as f64 {
        return Err(semantic(
            location,
            format!("{field} must be a finite nonnegative byte count, got {value}"),
        ));
    }
    Ok((value + 0.5).floor() as u64)
}

pub fn parse_topology(text: &str) -> Result<Topology, TopologyFileError> {
    let doc: TopologyDoc = serde_json::from_str(text)?;

    let mut nodes = Vec::new();
    let mut elids = BTreeMap::new();
    let mut servers = BTreeMap::new();
    let mut ids = BTreeSet::new();
    let mut elid_position = 0u32;

    for (k, node) in doc.nodes.iter().enumerate() {
        let loc = format!("nodes[{k}]");
        let (id, role) = match node {
            NodeDoc::Elid { id, .. } => (*id, Role::Elid),
            NodeDoc::Router { id } => (*id, Role::Router),
            NodeDoc::Mec { id, .. } => (*id, Role::Mec),
            NodeDoc::Cloud { id, .. } => (*id, Role::Cloud),
        };
        if !ids.insert(id) {
            return Err(semantic(loc, format!("duplicate node id {id}")));
        }
        nodes.push(Node {
            id: NodeId(id),
            role,
        });
        match node {
            NodeDoc::Elid {
                data_rate: direct,
                d,
                f_scan,
                v_scan,
                gamma,
                rho,
                ..
            } => {
                elid_position += 1;
                let scan_given =
                    d.is_some() || f_scan.is_some() || v_scan.is_some() || gamma.is_some();
                let rate = match (direct, scan_given) {
                    (Some(_), true) => {
                        return Err(semantic(
                            loc,
                            "give either D_lambda or scan parameters, not both",
                        ))
                    }
                    (Some(rate), false) => whole_bytes(*rate, &loc, "D_lambda")?,
                    (None, true) => {
                        let (Some(d), Some(f), Some(v), Some(g)) = (d, f_scan, v_scan, gamma)
                        else {
                            return Err(semantic(
                                loc,
                                "scan parameters need all of d, f_scan, V_scan, gamma",
                            ));
                        };
                        let profile = ScanProfile::new(*d, *f, *v, *g)
                            .map_err(|e| semantic(loc.clone(), e.to_string()))?;
                        data_rate(&profile).map_err(|e| semantic(loc.clone(), e.to_string()))?
                    }
                    (None, false) => {
                        return Err(semantic(loc, "elid needs D_lambda or scan parameters"))
                    }
                };
                elids.insert(
                    NodeId(id),
                    ElidParams {
                        data_rate: rate,
                        priority: rho.unwrap_or(f64::from(elid_position)),
                    },
                );
            }
            NodeDoc::Router { .. } => {
                servers.insert(NodeId(id), ServerParams::router());
            }
            NodeDoc::Mec { ram, omega, .. } | NodeDoc::Cloud { ram, omega, .. } => {
                servers.insert(
                    NodeId(id),
                    ServerParams {
                        ram: whole_bytes(*ram, &loc, "M")?,
                        throughput: *omega,
                    },
                );
            }
        }
    }

    let mut pairs: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    let mut links = Vec::new();
    for (k, link) in doc.links.iter().enumerate() {
        let loc = format!("links[{k}]");
        let pair = (link.i.min(link.j), link.i.max(link.j));
        if let Some(first) = pairs.insert(pair, k) {
            return Err(semantic(
                loc,
                format!(
                    "duplicate link {}-{} (first given at links[{first}])",
                    pair.0, pair.1
                ),
            ));
        }
        for end in [link.i, link.j] {
            if !ids.contains(&end) {
                return Err(semantic(loc, format!("unknown node {end}")));
            }
        }
        links.push(Link {
            a: NodeId(link.i),
            b: NodeId(link.j),
            bandwidth: link.bandwidth,
        });
    }

    Ok(Topology::new(nodes, links, elids, servers, doc.beta))
}

pub fn read_topology(path: &Path) -> Result<Topology, TopologyFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| TopologyFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_topology(&text)
}

/// Pretty-printed document. Sensors are always written with `D_lambda`.
pub fn topology_to_json(topology: &Topology) -> String {
    let nodes = topology
        .nodes()
        .iter()
        .map(|n| {
            let id = n.id.0;
            let server = topology
                .server(n.id)
                .copied()
                .unwrap_or(ServerParams::router());
            match n.role {
                Role::Elid => {
                    let p = topology.elid(n.id).copied().unwrap_or(ElidParams {
                        data_rate: 0,
                        priority: 0.0,
                    });
                    NodeDoc::Elid {
                        id,
                        data_rate: Some(p.data_rate as f64),
                        d: None,
                        f_scan: None,
                        v_scan: None,
                        gamma: None,
                        rho: Some(p.priority),
                    }
                }
                Role::Router => NodeDoc::Router { id },
                Role::Mec => NodeDoc::Mec {
                    id,
                    ram: server.ram as f64,
                    omega: server.throughput,
                },
                Role::Cloud => NodeDoc::Cloud {
                    id,
                    ram: server.ram as f64,
                    omega: server.throughput,
                },
            }
        })
        .collect();
    let links = topology
        .links()
        .iter()
        .map(|l| LinkDoc {
            i: l.a.0,
            j: l.b.0,
            bandwidth: l.bandwidth,
        })
        .collect();
    let doc = TopologyDoc {
        beta: topology.beta(),
        nodes,
        links,
    };
    serde_json::to_string_pretty(&doc).expect("topology documents always serialize")
}
