//! ASCII Gmsh MSH 2.2 reader and writer.
//!
//! Only 2-node lines and 3-node triangles are interpreted; other element
//! types are skipped. Physical surface tags must map to `air`, `iron` or
//! `eval` through a [`TagMap`]; line tags other than the outer boundary are
//! ignored.

use super::{Mesh, RegionTag, Triangle};
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Role a physical group plays in the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Air,
    Iron,
    Eval,
    OuterBoundary,
}

impl Role {
    pub fn parse(s: &str) -> Result<Role> {
        match s {
            "air" => Ok(Role::Air),
            "iron" => Ok(Role::Iron),
            "eval" => Ok(Role::Eval),
            "outer_boundary" => Ok(Role::OuterBoundary),
            other => Err(Error::Config(format!(
                "unknown region role '{other}' (expected air, iron, eval or outer_boundary)"
            ))),
        }
    }
}

/// Maps physical names (or raw physical ids) to roles.
#[derive(Debug, Clone, Default)]
pub struct TagMap {
    pub by_name: HashMap<String, Role>,
    pub by_id: HashMap<i64, Role>,
}

impl TagMap {
    /// Mapping used by the built-in mesh generators.
    pub fn builtin() -> TagMap {
        let mut by_name = HashMap::new();
        by_name.insert("air".to_string(), Role::Air);
        by_name.insert("iron".to_string(), Role::Iron);
        by_name.insert("eval".to_string(), Role::Eval);
        by_name.insert("outer_boundary".to_string(), Role::OuterBoundary);
        TagMap {
            by_name,
            by_id: HashMap::new(),
        }
    }

    fn role_of(&self, id: i64, names: &HashMap<i64, String>) -> Option<Role> {
        if let Some(r) = self.by_id.get(&id) {
            return Some(*r);
        }
        names.get(&id).and_then(|n| self.by_name.get(n)).copied()
    }
}

// Physical ids used when writing generated meshes.
const PHYS_AIR: i64 = 1;
const PHYS_IRON: i64 = 2;
const PHYS_EVAL: i64 = 3;
const PHYS_OUTER: i64 = 10;

struct Lines<'a> {
    iter: std::str::Lines<'a>,
    lineno: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str> {
        loop {
            match self.iter.next() {
                Some(l) => {
                    self.lineno += 1;
                    let t = l.trim();
                    if !t.is_empty() {
                        return Ok(t);
                    }
                }
                None => {
                    return Err(Error::MshParse {
                        line: self.lineno,
                        msg: "unexpected end of file".into(),
                    })
                }
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::MshParse {
            line: self.lineno,
            msg: msg.into(),
        }
    }
}

pub fn parse(text: &str, tags: &TagMap) -> Result<Mesh> {
    let mut lines = Lines {
        iter: text.lines(),
        lineno: 0,
    };

    let mut names: HashMap<i64, String> = HashMap::new();
    let mut raw_nodes: Vec<(i64, f64, f64, f64)> = Vec::new();
    let mut raw_tris: Vec<([i64; 3], i64)> = Vec::new();
    let mut seen_format = false;

    loop {
        let line = match lines.iter.next() {
            Some(l) => {
                lines.lineno += 1;
                l.trim()
            }
            None => break,
        };
        match line {
            "$MeshFormat" => {
                let l = lines.next()?;
                let mut it = l.split_whitespace();
                let version = it.next().ok_or_else(|| lines.err("missing version"))?;
                if version != "2.2" {
                    return Err(lines.err(format!(
                        "unsupported MSH version {version}; only ASCII 2.2 is supported"
                    )));
                }
                let ftype = it.next().ok_or_else(|| lines.err("missing file type"))?;
                if ftype != "0" {
                    return Err(lines.err("binary MSH files are not supported"));
                }
                expect_end(&mut lines, "$EndMeshFormat")?;
                seen_format = true;
            }
            "$PhysicalNames" => {
                let n: usize = parse_num(lines.next()?, &lines)?;
                for _ in 0..n {
                    let l = lines.next()?;
                    // dim id "name"
                    let mut it = l.split_whitespace();
                    let _dim: i64 = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| lines.err("bad physical name line"))?;
                    let id: i64 = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| lines.err("bad physical name line"))?;
                    let name = l
                        .splitn(3, char::is_whitespace)
                        .nth(2)
                        .map(|s| s.trim().trim_matches('"').to_string())
                        .ok_or_else(|| lines.err("bad physical name line"))?;
                    names.insert(id, name);
                }
                expect_end(&mut lines, "$EndPhysicalNames")?;
            }
            "$Nodes" => {
                let n: usize = parse_num(lines.next()?, &lines)?;
                raw_nodes.reserve(n);
                for _ in 0..n {
                    let l = lines.next()?;
                    let mut it = l.split_whitespace();
                    let id: i64 = next_num(&mut it, &lines)?;
                    let x: f64 = next_num(&mut it, &lines)?;
                    let y: f64 = next_num(&mut it, &lines)?;
                    let z: f64 = next_num(&mut it, &lines)?;
                    raw_nodes.push((id, x, y, z));
                }
                expect_end(&mut lines, "$EndNodes")?;
            }
            "$Elements" => {
                let n: usize = parse_num(lines.next()?, &lines)?;
                for _ in 0..n {
                    let l = lines.next()?;
                    let mut it = l.split_whitespace();
                    let _id: i64 = next_num(&mut it, &lines)?;
                    let etype: i64 = next_num(&mut it, &lines)?;
                    let ntags: usize = next_num(&mut it, &lines)?;
                    let mut phys = 0i64;
                    for k in 0..ntags {
                        let t: i64 = next_num(&mut it, &lines)?;
                        if k == 0 {
                            phys = t;
                        }
                    }
                    match etype {
                        2 => {
                            let a: i64 = next_num(&mut it, &lines)?;
                            let b: i64 = next_num(&mut it, &lines)?;
                            let c: i64 = next_num(&mut it, &lines)?;
                            raw_tris.push(([a, b, c], phys));
                        }
                        // Lines carry boundary tags only; the topological
                        // boundary is recomputed on build, so they are not
                        // stored. Other element types are skipped.
                        _ => {}
                    }
                }
                expect_end(&mut lines, "$EndElements")?;
            }
            other if other.starts_with('$') && !other.starts_with("$End") => {
                // Unknown section: skip to its end marker.
                let end = format!("$End{}", &other[1..]);
                loop {
                    let l = lines.next()?;
                    if l == end {
                        break;
                    }
                }
            }
            _ => {}
        }
    }

    if !seen_format {
        return Err(Error::MshParse {
            line: 0,
            msg: "missing $MeshFormat section".into(),
        });
    }
    if raw_nodes.is_empty() {
        return Err(Error::MshParse {
            line: 0,
            msg: "missing or empty $Nodes section".into(),
        });
    }

    // z must be constant (2D cross-section).
    let z0 = raw_nodes[0].3;
    for &(_, _, _, z) in &raw_nodes {
        if (z - z0).abs() > 1e-9 * z0.abs().max(1.0) {
            return Err(Error::MeshValidation(format!(
                "non-constant z coordinates ({z0} vs {z})"
            )));
        }
    }

    // Remap node ids (possibly sparse) to contiguous indices, ascending.
    raw_nodes.sort_by_key(|&(id, ..)| id);
    let mut id_map: HashMap<i64, usize> = HashMap::with_capacity(raw_nodes.len());
    let mut nodes = Vec::with_capacity(raw_nodes.len());
    for (i, &(id, x, y, _)) in raw_nodes.iter().enumerate() {
        if id_map.insert(id, i).is_some() {
            return Err(Error::MeshValidation(format!("duplicate node id {id}")));
        }
        nodes.push([x, y]);
    }

    let mut triangles = Vec::with_capacity(raw_tris.len());
    for (ns, phys) in raw_tris {
        let role = tags.role_of(phys, &names).ok_or_else(|| {
            Error::MeshValidation(format!(
                "triangle has physical tag {phys}{} with no air/iron/eval mapping",
                names
                    .get(&phys)
                    .map(|n| format!(" ('{n}')"))
                    .unwrap_or_default()
            ))
        })?;
        let tag = match role {
            Role::Air => RegionTag::Air,
            Role::Iron => RegionTag::Iron,
            Role::Eval => RegionTag::Eval,
            Role::OuterBoundary => {
                return Err(Error::MeshValidation(format!(
                    "triangle tagged with boundary physical {phys}"
                )))
            }
        };
        let mut idx = [0usize; 3];
        for (k, &nid) in ns.iter().enumerate() {
            idx[k] = *id_map
                .get(&nid)
                .ok_or_else(|| Error::MeshValidation(format!("element references unknown node {nid}")))?;
        }
        triangles.push(Triangle { nodes: idx, tag });
    }

    if triangles.is_empty() {
        return Err(Error::EmptyRegion("no triangles in mesh".into()));
    }

    Mesh::build(nodes, triangles)
}

fn expect_end(lines: &mut Lines, end: &str) -> Result<()> {
    let l = lines.next()?;
    if l != end {
        return Err(lines.err(format!("expected {end}, found '{l}'")));
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(s: &str, lines: &Lines) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| lines.err(format!("expected number, found '{s}'")))
}

fn next_num<'a, T: std::str::FromStr>(
    it: &mut impl Iterator<Item = &'a str>,
    lines: &Lines,
) -> Result<T> {
    it.next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| lines.err("truncated element/node line"))
}

pub fn write(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    out.push_str("$PhysicalNames\n4\n");
    out.push_str(&format!("1 {PHYS_OUTER} \"outer_boundary\"\n"));
    out.push_str(&format!("2 {PHYS_AIR} \"air\"\n"));
    out.push_str(&format!("2 {PHYS_IRON} \"iron\"\n"));
    out.push_str(&format!("2 {PHYS_EVAL} \"eval\"\n"));
    out.push_str("$EndPhysicalNames\n");

    out.push_str(&format!("$Nodes\n{}\n", mesh.n_nodes()));
    for (i, p) in mesh.nodes().iter().enumerate() {
        out.push_str(&format!("{} {} {} 0\n", i + 1, p[0], p[1]));
    }
    out.push_str("$EndNodes\n");

    let nelem = mesh.n_triangles() + mesh.boundary_edges().len();
    out.push_str(&format!("$Elements\n{nelem}\n"));
    let mut eid = 1usize;
    for e in mesh.boundary_edges() {
        out.push_str(&format!(
            "{eid} 1 2 {PHYS_OUTER} {PHYS_OUTER} {} {}\n",
            e[0] + 1,
            e[1] + 1
        ));
        eid += 1;
    }
    for t in mesh.triangles() {
        let phys = match t.tag {
            RegionTag::Air => PHYS_AIR,
            RegionTag::Iron => PHYS_IRON,
            RegionTag::Eval => PHYS_EVAL,
        };
        out.push_str(&format!(
            "{eid} 2 2 {phys} {phys} {} {} {}\n",
            t.nodes[0] + 1,
            t.nodes[1] + 1,
            t.nodes[2] + 1
        ));
        eid += 1;
    }
    out.push_str("$EndElements\n");
    out
}
