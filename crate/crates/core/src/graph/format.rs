//! Line-oriented graph files.
//!
//! ```text
//! # comment
//! vertices 3
//! edge 0 1 1.0
//! edge 1 2 2.0
//! kill 2 1.0
//! loop 2 1.0
//! ```
//!
//! `loop` lines carry self-loop weights (needed to store exterior collapses).
//! Numbers are written in shortest round-trip form, so reading back
//! reproduces every weight bit for bit.

use std::io::{BufRead, Write};

use super::{GraphBuilder, KilledWeightedGraph};
use crate::error::{Error, Result};
use crate::fmt17;

pub fn write_graph<W: Write>(graph: &KilledWeightedGraph, mut out: W) -> Result<()> {
    writeln!(out, "vertices {}", graph.vertex_count())?;
    for &(u, v, w) in graph.edges() {
        writeln!(out, "edge {u} {v} {}", fmt17(w))?;
    }
    for x in graph.vertices() {
        let k = graph.kill_weight(x);
        if k > 0.0 {
            writeln!(out, "kill {} {}", x.0, fmt17(k))?;
        }
    }
    for x in graph.vertices() {
        let l = graph.self_loop_weight(x);
        if l > 0.0 {
            writeln!(out, "loop {} {}", x.0, fmt17(l))?;
        }
    }
    Ok(())
}

pub fn read_graph<R: BufRead>(input: R) -> Result<KilledWeightedGraph> {
    let mut builder: Option<GraphBuilder> = None;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let perr = |msg: String| Error::Parse { line: lineno, msg };
        let uint = |s: &str| s.parse::<usize>().map_err(|e| perr(format!("`{s}`: {e}")));
        let real = |s: &str| s.parse::<f64>().map_err(|e| perr(format!("`{s}`: {e}")));
        match (fields[0], fields.len()) {
            ("vertices", 2) => {
                if builder.is_some() {
                    return Err(perr("duplicate `vertices` header".into()));
                }
                builder = Some(GraphBuilder::new(uint(fields[1])?));
            }
            (kw @ ("edge" | "kill" | "loop"), len) => {
                let b = builder
                    .as_mut()
                    .ok_or_else(|| perr("`vertices N` header must come first".into()))?;
                match (kw, len) {
                    ("edge", 4) => {
                        b.edge(uint(fields[1])?, uint(fields[2])?, real(fields[3])?);
                    }
                    ("kill", 3) => {
                        b.kill(uint(fields[1])?, real(fields[2])?);
                    }
                    ("loop", 3) => {
                        b.self_loop(uint(fields[1])?, real(fields[2])?);
                    }
                    _ => return Err(perr(format!("wrong number of fields for `{kw}`"))),
                }
            }
            (kw, _) => return Err(perr(format!("unrecognized line starting with `{kw}`"))),
        }
    }
    builder
        .ok_or_else(|| Error::Parse { line: 0, msg: "missing `vertices N` header".into() })?
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_biased_z, VertexId};

    #[test]
    fn parses_comments_and_blank_lines() {
        let text = "# two vertices\nvertices 2\n\nedge 0 1 1.5  # conductance\nkill 0 1\nkill 1 0.25\n";
        let g = read_graph(text.as_bytes()).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.conductance(VertexId(0), VertexId(1)), 1.5);
        assert_eq!(g.kill_weight(VertexId(1)), 0.25);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_graph("edge 0 1 1\n".as_bytes()).is_err());
        assert!(read_graph("vertices 2\nedge 0 1\n".as_bytes()).is_err());
        assert!(read_graph("vertices 2\nedge 0 1 x\n".as_bytes()).is_err());
        assert!(read_graph("vertices 2\nfoo 1\n".as_bytes()).is_err());
        let err = read_graph("vertices 2\nedge 0 1 1\nedge 1 0 2\nkill 0 1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("asymmetric"));
    }

    #[test]
    fn collapsed_graph_round_trips_bitwise() {
        let (g, _) = make_biased_z(5).unwrap();
        let mut buf = Vec::new();
        write_graph(&g, &mut buf).unwrap();
        let h = read_graph(buf.as_slice()).unwrap();
        assert_eq!(g.edges(), h.edges());
        assert_eq!(g.kill_weights(), h.kill_weights());
        assert_eq!(g.total_weights(), h.total_weights());
    }
}
