//! METIS/Chaco-style graph files and plain partition files.
//!
//! Graph file: a header line `n m [fmt]`, then one line per node listing
//! its neighbors with 1-based ids, each followed by an integer weight when
//! fmt ends in 1. Comment lines start with '%'. Partition file: one
//! 0-based block id per line, line i giving the block of node i.

use std::fmt::Write as _;

use crate::error::KabarError;
use crate::graph::{Graph, NodeId, Weight};
use crate::partition::BlockId;

struct RawAdjacency {
    n: usize,
    m: usize,
    /// adjacency[v] = (neighbor, weight, source line number)
    adjacency: Vec<Vec<(NodeId, Weight, usize)>>,
}

fn parse_header(line: &str, line_no: usize) -> Result<(usize, usize, bool), KabarError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 2 || fields.len() > 3 {
        return Err(KabarError::Parse {
            line: line_no,
            msg: format!("header must be 'n m [fmt]', got '{line}'"),
        });
    }
    let n: usize = fields[0].parse().map_err(|_| KabarError::Parse {
        line: line_no,
        msg: format!("invalid node count '{}'", fields[0]),
    })?;
    let m: usize = fields[1].parse().map_err(|_| KabarError::Parse {
        line: line_no,
        msg: format!("invalid edge count '{}'", fields[1]),
    })?;
    let edge_weights = match fields.get(2).copied().unwrap_or("0") {
        "0" | "00" | "000" => false,
        "1" | "01" | "001" => true,
        other => {
            return Err(KabarError::Parse {
                line: line_no,
                msg: format!("unsupported fmt '{other}' (node weights are not supported)"),
            })
        }
    };
    Ok((n, m, edge_weights))
}

fn parse_raw(input: &str) -> Result<RawAdjacency, KabarError> {
    let mut lines = input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('%'));
    let Some((header_no, header)) = lines.next() else {
        return Err(KabarError::Parse {
            line: 1,
            msg: "empty graph file".into(),
        });
    };
    let (n, m, edge_weights) = parse_header(header, header_no + 1)?;
    let mut adjacency: Vec<Vec<(NodeId, Weight, usize)>> = Vec::with_capacity(n);
    for (idx, line) in lines {
        if adjacency.len() == n {
            if line.trim().is_empty() {
                continue;
            }
            return Err(KabarError::Parse {
                line: idx + 1,
                msg: format!("more than {n} node lines"),
            });
        }
        let line_no = idx + 1;
        let v = adjacency.len() as NodeId;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let mut entry = Vec::new();
        if edge_weights {
            if tokens.len() % 2 != 0 {
                return Err(KabarError::Parse {
                    line: line_no,
                    msg: "expected neighbor/weight pairs".into(),
                });
            }
            for pair in tokens.chunks(2) {
                let u = parse_neighbor(pair[0], n, v, line_no)?;
                let w: Weight = pair[1].parse().map_err(|_| KabarError::Parse {
                    line: line_no,
                    msg: format!("non-integer edge weight '{}'", pair[1]),
                })?;
                if w <= 0 {
                    return Err(KabarError::Parse {
                        line: line_no,
                        msg: format!("edge weight must be positive, got {w}"),
                    });
                }
                entry.push((u, w, line_no));
            }
        } else {
            for tok in tokens {
                let u = parse_neighbor(tok, n, v, line_no)?;
                entry.push((u, 1, line_no));
            }
        }
        adjacency.push(entry);
    }
    if adjacency.len() != n {
        return Err(KabarError::Parse {
            line: input.lines().count(),
            msg: format!("expected {n} node lines, found {}", adjacency.len()),
        });
    }
    Ok(RawAdjacency { n, m, adjacency })
}

fn parse_neighbor(tok: &str, n: usize, v: NodeId, line_no: usize) -> Result<NodeId, KabarError> {
    let one_based: usize = tok.parse().map_err(|_| KabarError::Parse {
        line: line_no,
        msg: format!("invalid neighbor id '{tok}'"),
    })?;
    if one_based == 0 || one_based > n {
        return Err(KabarError::Parse {
            line: line_no,
            msg: format!("neighbor id {one_based} out of range 1..={n}"),
        });
    }
    let u = (one_based - 1) as NodeId;
    if u == v {
        return Err(KabarError::Parse {
            line: line_no,
            msg: format!("self-loop on node {}", v + 1),
        });
    }
    Ok(u)
}

/// Parses a graph file, validating symmetry and the header edge count.
pub fn parse_graph(input: &str) -> Result<Graph, KabarError> {
    let raw = parse_raw(input)?;
    let mut edges = Vec::new();
    for v in 0..raw.n {
        for &(u, w, line_no) in &raw.adjacency[v] {
            let back = raw.adjacency[u as usize]
                .iter()
                .find(|&&(x, _, _)| x as usize == v);
            match back {
                Some(&(_, bw, _)) if bw == w => {}
                Some(_) => {
                    return Err(KabarError::Parse {
                        line: line_no,
                        msg: format!(
                            "asymmetric weight for edge {}-{}",
                            v + 1,
                            u + 1
                        ),
                    })
                }
                None => {
                    return Err(KabarError::Parse {
                        line: line_no,
                        msg: format!(
                            "edge {}-{} missing from node {}'s line",
                            v + 1,
                            u + 1,
                            u + 1
                        ),
                    })
                }
            }
            if (u as usize) > v {
                edges.push((v as NodeId, u, w));
            }
        }
    }
    let g = Graph::from_edges(raw.n, &edges)?;
    if g.num_edges() != raw.m {
        return Err(KabarError::Parse {
            line: 1,
            msg: format!(
                "header declares {} edges but adjacency lists contain {}",
                raw.m,
                g.num_edges()
            ),
        });
    }
    Ok(g)
}

pub fn emit_graph(g: &Graph) -> String {
    let weighted = (0..g.num_nodes() as NodeId).any(|v| g.neighbors(v).any(|(_, w)| w != 1));
    let mut out = String::new();
    if weighted {
        let _ = writeln!(out, "{} {} 001", g.num_nodes(), g.num_edges());
    } else {
        let _ = writeln!(out, "{} {}", g.num_nodes(), g.num_edges());
    }
    for v in 0..g.num_nodes() as NodeId {
        let mut first = true;
        for (u, w) in g.neighbors(v) {
            if !first {
                out.push(' ');
            }
            first = false;
            if weighted {
                let _ = write!(out, "{} {}", u + 1, w);
            } else {
                let _ = write!(out, "{}", u + 1);
            }
        }
        out.push('\n');
    }
    out
}

/// One 0-based block id per line; line i is the block of node i.
pub fn parse_partition(input: &str, n: usize) -> Result<Vec<BlockId>, KabarError> {
    let mut assign = Vec::with_capacity(n);
    for (idx, line) in input.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let b: BlockId = t.parse().map_err(|_| KabarError::Parse {
            line: idx + 1,
            msg: format!("invalid block id '{t}'"),
        })?;
        assign.push(b);
    }
    if assign.len() != n {
        return Err(KabarError::Parse {
            line: input.lines().count(),
            msg: format!("partition file has {} entries, graph has {n} nodes", assign.len()),
        });
    }
    Ok(assign)
}

pub fn emit_partition(assign: &[BlockId]) -> String {
    let mut out = String::with_capacity(assign.len() * 2);
    for &b in assign {
        let _ = writeln!(out, "{b}");
    }
    out
}
