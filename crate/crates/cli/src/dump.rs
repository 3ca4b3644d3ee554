//! CSV dumps. Floats use the shortest round-trip exponent form.

use anyhow::{bail, Context, Result};
use lamina::graph_transform::Link;
use lamina::{DiscreteLamination, PlaneField, Section, Tube};
use std::path::Path;

pub fn num(x: f64) -> String {
    format!("{x:e}")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))
}

fn leaf_header(lam: &DiscreteLamination) -> Vec<String> {
    let mut h = vec!["node".to_string(), "code".to_string()];
    h.extend((0..lam.d()).map(|a| format!("u{a}")));
    h
}

fn leaf_cells(lam: &DiscreteLamination, g: usize) -> Vec<String> {
    let (c, u) = lam.node_params(g);
    let mut row = vec![g.to_string(), lam.codes()[c].to_string()];
    row.extend(u.into_iter().map(num));
    row
}

pub fn write_section(path: &Path, lam: &DiscreteLamination, s: &Section) -> Result<()> {
    let mut w = writer(path)?;
    let mut h = leaf_header(lam);
    h.extend((0..s.k).map(|j| format!("s{j}")));
    w.write_record(&h)?;
    for g in 0..lam.node_count() {
        let mut row = leaf_cells(lam, g);
        row.extend(s.get(g).iter().map(|&x| num(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a section dump and checks it against the configured grid.
pub fn read_section(path: &Path, lam: &DiscreteLamination, k: usize) -> Result<Section> {
    let mut r = csv::ReaderBuilder::new()
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let d = lam.d();
    let width = 2 + d + k;
    let mut s = Section::zeros(lam.node_count(), k);
    let mut seen = 0;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            bail!(
                "{}: row {} has {} fields, expected {width}",
                path.display(),
                line + 2,
                rec.len()
            );
        }
        let g: usize = rec[0].parse().with_context(|| format!("row {}: node", line + 2))?;
        if g != seen || g >= lam.node_count() {
            bail!("{}: row {} has node {g}, expected {seen}", path.display(), line + 2);
        }
        let (c, _) = lam.node_params(g);
        if rec[1] != lam.codes()[c].to_string() {
            bail!(
                "{}: row {} code {:?} does not match the grid",
                path.display(),
                line + 2,
                &rec[1]
            );
        }
        for j in 0..k {
            s.get_mut(g)[j] = rec[2 + d + j]
                .parse()
                .with_context(|| format!("row {}: s{j}", line + 2))?;
        }
        seen += 1;
    }
    if seen != lam.node_count() {
        bail!("{}: {seen} rows for {} nodes", path.display(), lam.node_count());
    }
    Ok(s)
}

pub fn write_planes(path: &Path, lam: &DiscreteLamination, p: &PlaneField) -> Result<()> {
    let mut w = writer(path)?;
    let mut h = leaf_header(lam);
    for i in 0..p.k {
        for j in 0..p.d {
            h.push(format!("l{i}_{j}"));
        }
    }
    w.write_record(&h)?;
    for g in 0..lam.node_count() {
        let mut row = leaf_cells(lam, g);
        row.extend(p.get(g).iter().map(|&x| num(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Base immersion, one row per node.
pub fn write_lamination(path: &Path, lam: &DiscreteLamination) -> Result<()> {
    let mut w = writer(path)?;
    let mut h = leaf_header(lam);
    h.extend((0..lam.n()).map(|i| format!("x{i}")));
    w.write_record(&h)?;
    for g in 0..lam.node_count() {
        let mut row = leaf_cells(lam, g);
        row.extend(lam.point(g).iter().map(|&x| num(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Perturbed immersion as per-leaf series.
pub fn write_plot(path: &Path, tube: &Tube, s: &Section) -> Result<()> {
    let lam = &tube.lam;
    let mut w = writer(path)?;
    let mut h = vec!["leaf".to_string(), "code".to_string()];
    h.extend((0..lam.d()).map(|a| format!("u{a}")));
    h.extend((0..lam.n()).map(|i| format!("x{i}")));
    w.write_record(&h)?;
    for g in 0..lam.node_count() {
        let (c, u) = lam.node_params(g);
        let mut row = vec![c.to_string(), lam.codes()[c].to_string()];
        row.extend(u.into_iter().map(num));
        row.extend(tube.node_immersion(g, s).into_iter().map(num));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pullback(path: &Path, lam: &DiscreteLamination, links: &[Option<Link>]) -> Result<()> {
    let mut w = writer(path)?;
    let mut h = leaf_header(lam);
    h.push("image_code".into());
    h.extend((0..lam.d()).map(|a| format!("image_u{a}")));
    w.write_record(&h)?;
    for (g, l) in links.iter().enumerate() {
        let Some(l) = l else { continue };
        let mut row = leaf_cells(lam, g);
        row.push(lam.codes()[l.code].to_string());
        row.extend(l.u.iter().map(|&x| num(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
