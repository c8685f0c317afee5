//! JSON Lines dataset files.
//!
//! Line 1 is a header `{"version":1,"num_classes":C,"spec":{...}}`; every
//! following line is one graph
//! `{"n":n,"d":d,"x":[n·d floats],"edges":[[u,v],...],"w":[...],"y":label}`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::graph::ConnectomeGraph;
use super::synthetic::{generate_synthetic, SyntheticSpec};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub num_classes: usize,
    /// Generator settings, or free-form provenance for imported data.
    pub spec: serde_json::Value,
    pub graphs: Vec<ConnectomeGraph>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    num_classes: usize,
    #[serde(default)]
    spec: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    n: usize,
    d: usize,
    x: Vec<f64>,
    edges: Vec<[usize; 2]>,
    w: Vec<f64>,
    y: usize,
}

impl Dataset {
    pub fn synthetic(spec: &SyntheticSpec) -> Result<Self> {
        let graphs = generate_synthetic(spec)?;
        Ok(Self {
            num_classes: spec.num_classes,
            spec: serde_json::to_value(spec).expect("spec serialises"),
            graphs,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.graphs.first().map(|g| g.d())
    }

    pub fn mean_edge_density(&self) -> f64 {
        if self.graphs.is_empty() {
            return 0.0;
        }
        self.graphs.iter().map(|g| g.edge_density()).sum::<f64>() / self.graphs.len() as f64
    }

    pub fn total_edges(&self) -> usize {
        self.graphs.iter().map(|g| g.num_edges()).sum()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = Header {
            version: FORMAT_VERSION,
            num_classes: self.num_classes,
            spec: self.spec.clone(),
        };
        out.push_str(&serde_json::to_string(&header).expect("header serialises"));
        out.push('\n');
        for g in &self.graphs {
            let rec = GraphRecord {
                n: g.n(),
                d: g.d(),
                x: g.x().data().to_vec(),
                edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
                w: g.edge_weights().to_vec(),
                y: g.label(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("graph serialises"));
            out.push('\n');
        }
        out
    }

    /// Hex SHA-256 of the serialised file contents.
    pub fn content_hash(&self) -> String {
        hex_digest(self.to_jsonl().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_jsonl().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let perr = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = reader.lines().enumerate();
        let header: Header = match lines.next() {
            Some((_, line)) => {
                let line = line.map_err(|e| Error::io(path, e))?;
                serde_json::from_str(&line).map_err(|e| perr(1, format!("bad header: {e}")))?
            }
            None => return Err(perr(1, "empty file".into())),
        };
        if header.version != FORMAT_VERSION {
            return Err(perr(1, format!("unsupported version {}", header.version)));
        }
        if header.num_classes < 1 {
            return Err(perr(1, "num_classes must be positive".into()));
        }
        let mut graphs = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: GraphRecord = serde_json::from_str(&line).map_err(|e| perr(lineno, e.to_string()))?;
            if rec.y >= header.num_classes {
                return Err(perr(
                    lineno,
                    format!("label {} >= num_classes {}", rec.y, header.num_classes),
                ));
            }
            let x = Tensor::from_vec(rec.n, rec.d, rec.x).map_err(|e| perr(lineno, e.to_string()))?;
            let edges = rec.edges.iter().map(|e| (e[0], e[1])).collect();
            let g = ConnectomeGraph::new(x, edges, rec.w, rec.y).map_err(|e| perr(lineno, e.to_string()))?;
            graphs.push(g);
        }
        Ok(Self {
            num_classes: header.num_classes,
            spec: header.spec,
            graphs,
        })
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
