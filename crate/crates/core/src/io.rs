//! Instance and result files.
//!
//! * DIMACS max-flow text (`p max`, `n`, `a`, `c` lines).
//! * `PCUT1` grid files, binary little-endian or a text variant.
//! * Dual-state snapshots tagged with an instance fingerprint.
//! * CSV iteration traces and 0/1 labeling files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{Connectivity, CutEnergy, Edge, Grid, GridEnergy, Labeling};
use crate::projections::DualState;
use crate::solvers::TraceEntry;

// ---------------------------------------------------------------- DIMACS

/// A max-flow instance with terminals folded out.
///
/// Inner arcs are kept directed as read; [`DimacsInstance::to_cut`] turns
/// them into the symmetric form.
#[derive(Debug, Clone, PartialEq)]
pub struct DimacsInstance {
    /// Capacity of the arc source -> i, per inner node.
    pub source_caps: Vec<f64>,
    /// Capacity of the arc i -> sink, per inner node.
    pub sink_caps: Vec<f64>,
    /// Directed inner arcs `(u, v, capacity)` on 0-based inner ids.
    pub arcs: Vec<(usize, usize, f64)>,
    /// Capacity of direct source -> sink arcs.
    pub direct: f64,
}

impl DimacsInstance {
    pub fn n(&self) -> usize {
        self.source_caps.len()
    }

    /// Unaries `w_i = cap(s -> i) - cap(i -> t)`.
    pub fn unary(&self) -> Vec<f64> {
        self.source_caps.iter().zip(&self.sink_caps).map(|(s, t)| s - t).collect()
    }

    /// Symmetric cut energy with the same cut function up to a constant.
    ///
    /// A pair of opposite arcs `c_uv`, `c_vu` becomes
    /// `a_uv = (c_uv + c_vu) / 2` plus the linear term `(c_uv - c_vu) / 2`
    /// moved from `w_u` to `w_v`.
    pub fn to_cut(&self) -> Result<CutEnergy> {
        let mut w = self.unary();
        let mut pairs: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
        for &(u, v, c) in &self.arcs {
            if u == v {
                continue;
            }
            let (key, forward) = if u < v { ((u, v), true) } else { ((v, u), false) };
            let e = pairs.entry(key).or_insert((0.0, 0.0));
            if forward {
                e.0 += c;
            } else {
                e.1 += c;
            }
        }
        let mut edges = Vec::with_capacity(pairs.len());
        for ((i, j), (cij, cji)) in pairs {
            let half = (cij - cji) / 2.0;
            if half != 0.0 {
                w[i] -= half;
                w[j] += half;
            }
            edges.push(Edge::new(i, j, (cij + cji) / 2.0));
        }
        CutEnergy::new(w, edges)
    }

    /// Standard network for a cut energy: terminal arcs from the sign of
    /// each unary, and both arc directions with capacity `a_ij` per edge.
    pub fn from_cut(cut: &CutEnergy) -> Self {
        let source_caps = cut.unary().iter().map(|&w| if w > 0.0 { w } else { 0.0 }).collect();
        let sink_caps = cut.unary().iter().map(|&w| if w < 0.0 { -w } else { 0.0 }).collect();
        let mut arcs = Vec::with_capacity(2 * cut.edges().len());
        for e in cut.edges() {
            arcs.push((e.i, e.j, e.weight));
            arcs.push((e.j, e.i, e.weight));
        }
        DimacsInstance { source_caps, sink_caps, arcs, direct: 0.0 }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("invalid {what} {tok:?}")))
}

pub fn parse_dimacs(text: &str) -> Result<DimacsInstance> {
    let mut header: Option<(usize, usize)> = None;
    let mut source = None;
    let mut sink = None;
    let mut raw_arcs: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let mut toks = raw.split_whitespace();
        let Some(kind) = toks.next() else { continue };
        match kind {
            "c" => continue,
            "p" => {
                if header.is_some() {
                    return Err(parse_err(line, "second problem line"));
                }
                if toks.next() != Some("max") {
                    return Err(parse_err(line, "expected `p max <nodes> <arcs>`"));
                }
                let nodes: usize = parse_num(toks.next(), line, "node count")?;
                let arcs: usize = parse_num(toks.next(), line, "arc count")?;
                if nodes < 2 {
                    return Err(parse_err(line, "need at least source and sink"));
                }
                header = Some((nodes, arcs));
            }
            "n" => {
                let (nodes, _) = header.ok_or_else(|| parse_err(line, "node line before problem line"))?;
                let id: usize = parse_num(toks.next(), line, "node id")?;
                if id == 0 || id > nodes {
                    return Err(parse_err(line, format!("node id {id} out of range")));
                }
                let slot = match toks.next() {
                    Some("s") => &mut source,
                    Some("t") => &mut sink,
                    other => return Err(parse_err(line, format!("expected s or t, got {other:?}"))),
                };
                if slot.replace(id).is_some() {
                    return Err(parse_err(line, "terminal declared twice"));
                }
            }
            "a" => {
                let (nodes, _) = header.ok_or_else(|| parse_err(line, "arc line before problem line"))?;
                let u: usize = parse_num(toks.next(), line, "arc tail")?;
                let v: usize = parse_num(toks.next(), line, "arc head")?;
                let cap: f64 = parse_num(toks.next(), line, "capacity")?;
                if u == 0 || v == 0 || u > nodes || v > nodes {
                    return Err(parse_err(line, "arc endpoint out of range"));
                }
                if !(cap >= 0.0) || !cap.is_finite() {
                    return Err(parse_err(line, format!("invalid capacity {cap}")));
                }
                raw_arcs.push((line, u, v, cap));
            }
            other => return Err(parse_err(line, format!("unknown line type {other:?}"))),
        }
        if toks.next().is_some() && kind != "c" {
            return Err(parse_err(line, "trailing tokens"));
        }
    }
    let (nodes, arc_count) = header.ok_or_else(|| parse_err(0, "missing problem line"))?;
    let s = source.ok_or_else(|| parse_err(0, "no source node"))?;
    let t = sink.ok_or_else(|| parse_err(0, "no sink node"))?;
    if s == t {
        return Err(parse_err(0, "source and sink coincide"));
    }
    if raw_arcs.len() != arc_count {
        return Err(parse_err(0, format!("header declares {arc_count} arcs, found {}", raw_arcs.len())));
    }
    // inner nodes keep their relative order
    let inner = |id: usize| id - 1 - (id > s) as usize - (id > t) as usize;
    let n = nodes - 2;
    let mut inst = DimacsInstance { source_caps: vec![0.0; n], sink_caps: vec![0.0; n], arcs: Vec::new(), direct: 0.0 };
    for (line, u, v, cap) in raw_arcs {
        match (u == s, u == t, v == s, v == t) {
            (true, _, _, true) => inst.direct += cap,
            (true, _, false, false) => inst.source_caps[inner(v)] += cap,
            (false, false, _, true) => inst.sink_caps[inner(u)] += cap,
            (false, false, false, false) => inst.arcs.push((inner(u), inner(v), cap)),
            _ => return Err(parse_err(line, "arc into the source or out of the sink")),
        }
    }
    Ok(inst)
}

pub fn read_dimacs(path: impl AsRef<Path>) -> Result<DimacsInstance> {
    let text = std::fs::read_to_string(path)?;
    parse_dimacs(&text)
}

/// Source is node 1, sink node `n + 2`, inner node `i` is `i + 2`.
pub fn format_dimacs(inst: &DimacsInstance) -> String {
    use std::fmt::Write as _;
    let n = inst.n();
    let (s, t) = (1, n + 2);
    let mut lines = Vec::new();
    if inst.direct != 0.0 {
        lines.push((s, t, inst.direct));
    }
    for i in 0..n {
        if inst.source_caps[i] != 0.0 {
            lines.push((s, i + 2, inst.source_caps[i]));
        }
        if inst.sink_caps[i] != 0.0 {
            lines.push((i + 2, t, inst.sink_caps[i]));
        }
    }
    lines.extend(inst.arcs.iter().map(|&(u, v, c)| (u + 2, v + 2, c)));
    let mut out = String::new();
    let _ = writeln!(out, "p max {} {}", n + 2, lines.len());
    let _ = writeln!(out, "n {s} s");
    let _ = writeln!(out, "n {t} t");
    for (u, v, c) in lines {
        let _ = writeln!(out, "a {u} {v} {c}");
    }
    out
}

pub fn write_dimacs(inst: &DimacsInstance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_dimacs(inst))?;
    Ok(())
}

// ---------------------------------------------------------------- PCUT1

const GRID_MAGIC: &[u8; 6] = b"PCUT1\0";
const GRID_TEXT_MAGIC: &str = "PCUT1 text";

fn connectivity_from_code(code: u8) -> Result<Connectivity> {
    Connectivity::from_code(code).ok_or_else(|| Error::Format(format!("unknown connectivity code {code}")))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated payload".into())
    } else {
        Error::Io(e)
    }
}

/// Binary layout: magic, `u8` rank, `u8` connectivity, `u64` dims, then the
/// unaries and each direction's weights as `f64`, all little-endian.
pub fn encode_grid(g: &GridEnergy) -> Vec<u8> {
    let grid = g.grid();
    let mut out = Vec::with_capacity(16 + 8 * (g.n() + g.edges().len()));
    out.extend_from_slice(GRID_MAGIC);
    out.push(grid.dims().len() as u8);
    out.push(grid.connectivity().code());
    for &d in grid.dims() {
        out.write_u64::<LittleEndian>(d as u64).expect("vec write");
    }
    for &w in g.unary() {
        out.write_f64::<LittleEndian>(w).expect("vec write");
    }
    for ws in g.directional_weights() {
        for w in ws {
            out.write_f64::<LittleEndian>(w).expect("vec write");
        }
    }
    out
}

pub fn decode_grid(bytes: &[u8]) -> Result<GridEnergy> {
    if bytes.len() < GRID_MAGIC.len() || &bytes[..GRID_MAGIC.len()] != GRID_MAGIC {
        return Err(Error::Format("not a PCUT1 binary file".into()));
    }
    let mut r = &bytes[GRID_MAGIC.len()..];
    let rank = r.read_u8().map_err(truncated)? as usize;
    let conn = connectivity_from_code(r.read_u8().map_err(truncated)?)?;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        let d = r.read_u64::<LittleEndian>().map_err(truncated)?;
        dims.push(usize::try_from(d).map_err(|_| Error::Format(format!("dimension {d} too large")))?);
    }
    let grid = Grid::new(&dims, conn)?;
    let expected = grid.n() + (0..grid.num_directions()).map(|d| grid.direction_len(d)).sum::<usize>();
    if r.len() < 8 * expected {
        return Err(Error::Format(format!("truncated payload: {} of {} bytes", r.len(), 8 * expected)));
    }
    if r.len() > 8 * expected {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    let mut read_vec = |len: usize| -> Result<Vec<f64>> {
        let mut v = vec![0.0; len];
        r.read_f64_into::<LittleEndian>(&mut v).map_err(truncated)?;
        Ok(v)
    };
    let unary = read_vec(grid.n())?;
    let weights = (0..grid.num_directions())
        .map(|d| read_vec(grid.direction_len(d)))
        .collect::<Result<Vec<_>>>()?;
    GridEnergy::from_directional(grid, unary, &weights)
}

/// Text variant: a magic line, `dims`, `connectivity`, `unary`, then one
/// `dir` line per direction.
pub fn format_grid_text(g: &GridEnergy) -> String {
    let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let dims = g.grid().dims().iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ");
    let mut out = format!("{GRID_TEXT_MAGIC}\ndims {dims}\nconnectivity {}\nunary {}\n", g.grid().connectivity(), join(g.unary()));
    for ws in g.directional_weights() {
        out.push_str(&format!("dir {}\n", join(&ws)));
    }
    out
}

pub fn parse_grid_text(text: &str) -> Result<GridEnergy> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == GRID_TEXT_MAGIC => {}
        _ => return Err(Error::Format("not a PCUT1 text file".into())),
    }
    let mut field = |name: &str| -> Result<(usize, Vec<String>)> {
        let (idx, l) = lines.next().ok_or_else(|| Error::Format(format!("missing `{name}` line")))?;
        let mut toks = l.split_whitespace();
        if toks.next() != Some(name) {
            return Err(parse_err(idx + 1, format!("expected `{name}`")));
        }
        Ok((idx + 1, toks.map(str::to_owned).collect()))
    };
    let floats = |line: usize, toks: Vec<String>| -> Result<Vec<f64>> {
        toks.iter()
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(line, format!("invalid number {t:?}"))))
            .collect()
    };
    let (line, dims) = field("dims")?;
    let dims = dims
        .iter()
        .map(|t| t.parse::<usize>().map_err(|_| parse_err(line, format!("invalid dimension {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let (line, conn) = field("connectivity")?;
    let conn: Connectivity = conn.first().ok_or_else(|| parse_err(line, "missing connectivity"))?.parse()?;
    let grid = Grid::new(&dims, conn)?;
    let (line, unary) = field("unary")?;
    let unary = floats(line, unary)?;
    let mut weights = Vec::new();
    for _ in 0..grid.num_directions() {
        let (line, ws) = field("dir")?;
        weights.push(floats(line, ws)?);
    }
    GridEnergy::from_directional(grid, unary, &weights)
}

/// Reads either PCUT1 variant, chosen by the leading bytes.
pub fn read_grid(path: impl AsRef<Path>) -> Result<GridEnergy> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(GRID_TEXT_MAGIC.as_bytes()) {
        let text = String::from_utf8(bytes).map_err(|_| Error::Format("text grid is not UTF-8".into()))?;
        parse_grid_text(&text)
    } else {
        decode_grid(&bytes)
    }
}

pub fn write_grid(g: &GridEnergy, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_grid(g))?;
    Ok(())
}

pub fn write_grid_text(g: &GridEnergy, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_grid_text(g))?;
    Ok(())
}

// ---------------------------------------------------------------- duals

/// Identifies the pairwise structure a dual state belongs to: grid shape and
/// a SHA-256 of the edge list. Unaries are not hashed, so a state can seed a
/// solve on the same graph with different data terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    pub dims: Vec<usize>,
    pub connectivity: Option<Connectivity>,
    pub n: usize,
    pub hash: [u8; 32],
}

fn edge_hash(cut: &CutEnergy) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((cut.n() as u64).to_le_bytes());
    for e in cut.edges() {
        h.update((e.i as u64).to_le_bytes());
        h.update((e.j as u64).to_le_bytes());
        h.update(e.weight.to_bits().to_le_bytes());
    }
    h.finalize().into()
}

impl Fingerprint {
    pub fn of_grid(g: &GridEnergy) -> Self {
        Fingerprint {
            dims: g.grid().dims().to_vec(),
            connectivity: Some(g.grid().connectivity()),
            n: g.n(),
            hash: edge_hash(g.cut()),
        }
    }

    pub fn of_cut(cut: &CutEnergy) -> Self {
        Fingerprint { dims: Vec::new(), connectivity: None, n: cut.n(), hash: edge_hash(cut) }
    }

    fn describe(&self) -> String {
        let hex: String = self.hash[..6].iter().map(|b| format!("{b:02x}")).collect();
        let conn = self.connectivity.map_or("general".to_string(), |c| c.to_string());
        format!("dims {:?} {conn} n={} edges {hex}", self.dims, self.n)
    }
}

const DUAL_MAGIC: &[u8; 8] = b"PCUTDUAL";
const DUAL_VERSION: u8 = 1;

/// Snapshot layout: magic, version, fingerprint, `u64` r and n, a field
/// mask (y, lambda, z), then each present field as `r * n` little-endian
/// `f64`s.
pub fn encode_dual(state: &DualState, fp: &Fingerprint) -> Result<Vec<u8>> {
    let (r, n) = state.shape().unwrap_or((0, fp.n));
    let fields = [&state.y, &state.lambda, &state.z];
    for f in fields.into_iter().flatten() {
        if f.len() != r || f.iter().any(|b| b.len() != n) {
            return Err(Error::Format("dual state fields have inconsistent shapes".into()));
        }
    }
    let mut out = Vec::new();
    out.extend_from_slice(DUAL_MAGIC);
    out.push(DUAL_VERSION);
    out.push(fp.dims.len() as u8);
    for &d in &fp.dims {
        out.write_u64::<LittleEndian>(d as u64)?;
    }
    out.push(fp.connectivity.map_or(0, |c| c.code()));
    out.write_u64::<LittleEndian>(fp.n as u64)?;
    out.extend_from_slice(&fp.hash);
    out.write_u64::<LittleEndian>(r as u64)?;
    out.write_u64::<LittleEndian>(n as u64)?;
    let mask = fields.iter().enumerate().fold(0u8, |m, (k, f)| m | ((f.is_some() as u8) << k));
    out.push(mask);
    for f in fields.into_iter().flatten() {
        for block in f {
            for &v in block {
                out.write_f64::<LittleEndian>(v)?;
            }
        }
    }
    Ok(out)
}

pub fn decode_dual(bytes: &[u8]) -> Result<(DualState, Fingerprint)> {
    if !bytes.starts_with(DUAL_MAGIC) {
        return Err(Error::Format("not a dual snapshot".into()));
    }
    let mut r = &bytes[DUAL_MAGIC.len()..];
    let version = r.read_u8().map_err(truncated)?;
    if version != DUAL_VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let rank = r.read_u8().map_err(truncated)? as usize;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(r.read_u64::<LittleEndian>().map_err(truncated)? as usize);
    }
    let code = r.read_u8().map_err(truncated)?;
    let connectivity = if code == 0 { None } else { Some(connectivity_from_code(code)?) };
    let fp_n = r.read_u64::<LittleEndian>().map_err(truncated)? as usize;
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash).map_err(truncated)?;
    let classes = r.read_u64::<LittleEndian>().map_err(truncated)? as usize;
    let n = r.read_u64::<LittleEndian>().map_err(truncated)? as usize;
    let mask = r.read_u8().map_err(truncated)?;
    if mask > 0b111 {
        return Err(Error::Format(format!("invalid field mask {mask:#b}")));
    }
    let present = mask.count_ones() as usize;
    let need = classes.checked_mul(n).and_then(|c| c.checked_mul(8 * present));
    if need != Some(r.len()) {
        return Err(Error::Format("snapshot payload has the wrong length".into()));
    }
    let mut read_field = |bit: u8| -> Result<Option<Vec<Vec<f64>>>> {
        if mask & (1 << bit) == 0 {
            return Ok(None);
        }
        (0..classes)
            .map(|_| {
                let mut b = vec![0.0; n];
                r.read_f64_into::<LittleEndian>(&mut b).map_err(truncated)?;
                Ok(b)
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    };
    let state = DualState { y: read_field(0)?, lambda: read_field(1)?, z: read_field(2)? };
    Ok((state, Fingerprint { dims, connectivity, n: fp_n, hash }))
}

pub fn save_dual(state: &DualState, fp: &Fingerprint, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_dual(state, fp)?;
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

/// Loads a snapshot, refusing one whose fingerprint differs from `expected`
/// unless `force` is set.
pub fn load_dual(path: impl AsRef<Path>, expected: &Fingerprint, force: bool) -> Result<DualState> {
    let bytes = std::fs::read(path)?;
    let (state, fp) = decode_dual(&bytes)?;
    if !force && fp != *expected {
        return Err(Error::FingerprintMismatch(format!(
            "snapshot is for {}, instance is {}",
            fp.describe(),
            expected.describe()
        )));
    }
    Ok(state)
}

// ---------------------------------------------------------------- traces

#[derive(Serialize)]
struct TraceRow {
    iter: usize,
    gap: f64,
    dual_objective: f64,
    jaccard_to_final: Option<f64>,
    wall_ms: f64,
}

/// CSV with columns `iter, gap, dual_objective, jaccard_to_final, wall_ms`.
pub fn write_trace_csv<W: Write>(trace: &[TraceEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in trace {
        w.serialize(TraceRow {
            iter: t.iter,
            gap: t.gap,
            dual_objective: t.dual_objective,
            jaccard_to_final: t.jaccard_to_final,
            wall_ms: t.wall_ms,
        })?;
    }
    if trace.is_empty() {
        w.write_record(["iter", "gap", "dual_objective", "jaccard_to_final", "wall_ms"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(trace: &[TraceEntry], path: impl AsRef<Path>) -> Result<()> {
    write_trace_csv(trace, File::create(path)?)
}

// ---------------------------------------------------------------- labelings

/// One `0` or `1` per line.
pub fn write_labeling(x: &Labeling, path: impl AsRef<Path>) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for &b in x.as_slice() {
        writeln!(f, "{}", b as u8)?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_labeling(path: impl AsRef<Path>) -> Result<Labeling> {
    let f = BufReader::new(File::open(path)?);
    let mut bits = Vec::new();
    for (idx, line) in f.lines().enumerate() {
        let line = line?;
        match line.trim() {
            "" => {}
            "0" => bits.push(false),
            "1" => bits.push(true),
            other => return Err(parse_err(idx + 1, format!("expected 0 or 1, got {other:?}"))),
        }
    }
    Ok(Labeling(bits))
}
