//! Dataset files.
//!
//! Dataset CSV: two comment lines `# manifold=<tag>` and
//! `# targets=labels:<classes>` or `# targets=values`, a header row
//! `target,c0,c1,…`, then one sample per row with the point's flat ambient
//! coordinates (SPD matrices row-major). Provenance goes to a JSON sidecar.
//!
//! Landmark CSV: one configuration per row, `x1,y1,…,xk,yk`, with an
//! optional header; a header whose first cell is `label` marks a leading
//! integer label column. SPD CSV uses the same layout with `n²` row-major
//! entries per row. SPD JSON is an array of `{"label": l, "matrix": [[…]]}`
//! objects or of bare matrices.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::manifolds::{preshape_flat, Manifold, ManifoldPoint};
use crate::models::{flatten_point, unflatten_point};
use crate::nn::Targets;
use crate::synthdata::{Dataset, Provenance};
use crate::{Error, Result};

fn fmt_target(targets: &Targets, i: usize) -> String {
    match targets {
        Targets::Labels { labels, .. } => labels[i].to_string(),
        Targets::Values(v) => v[i].to_string(),
    }
}

pub fn write_dataset_csv<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    writeln!(out, "# manifold={}", dataset.manifold())?;
    match dataset.targets() {
        Targets::Labels { classes, .. } => writeln!(out, "# targets=labels:{classes}")?,
        Targets::Values(_) => writeln!(out, "# targets=values")?,
    }
    let mut w = csv::Writer::from_writer(out);
    let width = dataset.manifold().flat_len();
    let mut header = vec!["target".to_string()];
    header.extend((0..width).map(|j| format!("c{j}")));
    w.write_record(&header)?;
    for (i, x) in dataset.inputs().iter().enumerate() {
        let mut row = vec![fmt_target(dataset.targets(), i)];
        row.extend(flatten_point(x).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, csv_path: &Path, provenance_path: Option<&Path>) -> Result<()> {
    write_dataset_csv(dataset, std::io::BufWriter::new(std::fs::File::create(csv_path)?))?;
    if let Some(p) = provenance_path {
        std::fs::write(p, serde_json::to_string_pretty(&dataset.provenance)?)?;
    }
    Ok(())
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut reader = BufReader::new(input);
    let mut manifold: Option<Manifold> = None;
    let mut classes: Option<Option<usize>> = None;
    let mut body = String::new();
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let Some(comment) = line.trim().strip_prefix('#') else {
            body.push_str(&line);
            break;
        };
        let Some((key, value)) = comment.trim().split_once('=') else {
            continue;
        };
        match key.trim() {
            "manifold" => manifold = Some(value.trim().parse()?),
            "targets" => {
                let v = value.trim();
                classes = Some(if v == "values" {
                    None
                } else if let Some(c) = v.strip_prefix("labels:") {
                    Some(c.parse().map_err(|_| Error::Parse(format!("bad class count {c:?}")))?)
                } else {
                    return Err(Error::Parse(format!("unknown targets kind {v:?}")));
                });
            }
            _ => {}
        }
    }
    reader.read_to_string(&mut body)?;
    let manifold = manifold.ok_or_else(|| Error::Parse("missing '# manifold=' line".into()))?;
    let classes = classes.ok_or_else(|| Error::Parse("missing '# targets=' line".into()))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row: Vec<&str> = rec.iter().collect();
        let (target, coords) = row
            .split_first()
            .ok_or_else(|| Error::Parse(format!("row {i} is empty")))?;
        let xs = parse_floats(coords, i)?;
        inputs.push(unflatten_point(manifold, &xs).map_err(|e| e.at_sample(i))?);
        match classes {
            Some(_) => labels.push(
                target
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("row {i}: bad label {target:?}")))?,
            ),
            None => values.push(parse_float(target, i)?),
        }
    }
    let targets = match classes {
        Some(classes) => Targets::Labels { labels, classes },
        None => Targets::Values(values),
    };
    Dataset::new(manifold, inputs, targets, Provenance::new("file", None, ()))
}

/// Reads a dataset CSV and, when given, the provenance sidecar written by
/// [`save_dataset`].
pub fn load_dataset(csv_path: &Path, provenance_path: Option<&Path>) -> Result<Dataset> {
    let mut data = read_dataset_csv(std::fs::File::open(csv_path)?)?;
    if let Some(p) = provenance_path {
        data.provenance = serde_json::from_str(&std::fs::read_to_string(p)?)?;
    }
    Ok(data)
}

fn parse_float(s: &str, row: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("row {row}: bad number {s:?}")))
}

fn parse_floats(cells: &[&str], row: usize) -> Result<Vec<f64>> {
    cells.iter().map(|c| parse_float(c, row)).collect()
}

/// Rows of numbers with an optional header and optional leading label
/// column. Returns the numeric rows and labels (if present).
/// Numeric rows and the optional leading label column.
type Rows = (Vec<Vec<f64>>, Option<Vec<usize>>);

fn read_numeric_rows<R: Read>(input: R) -> Result<Rows> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut rows = Vec::new();
    let mut labels: Option<Vec<usize>> = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cells: Vec<&str> = rec.iter().collect();
        if i == 0 && cells.first().is_some_and(|c| c.parse::<f64>().is_err()) {
            if cells[0].eq_ignore_ascii_case("label") {
                labels = Some(Vec::new());
            }
            continue;
        }
        let cells = match &mut labels {
            Some(ls) => {
                let (l, rest) = cells
                    .split_first()
                    .ok_or_else(|| Error::Parse(format!("row {i} is empty")))?;
                ls.push(l.parse().map_err(|_| Error::Parse(format!("row {i}: bad label {l:?}")))?);
                rest
            }
            None => &cells[..],
        };
        rows.push(parse_floats(cells, i)?);
    }
    Ok((rows, labels))
}

/// Landmark configurations as preshapes, plus labels if the file has them.
pub fn read_landmark_csv<R: Read>(input: R) -> Result<(Vec<ManifoldPoint>, Option<Vec<usize>>)> {
    let (rows, labels) = read_numeric_rows(input)?;
    let points = rows
        .iter()
        .enumerate()
        .map(|(i, r)| preshape_flat(r).map_err(|e| e.at_sample(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok((points, labels))
}

/// SPD matrices (row-major rows), plus labels if the file has them.
pub fn read_spd_csv<R: Read>(input: R) -> Result<(Vec<ManifoldPoint>, Option<Vec<usize>>)> {
    let (rows, labels) = read_numeric_rows(input)?;
    let points = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let n = (r.len() as f64).sqrt().round() as usize;
            if n * n != r.len() {
                return Err(Error::Shape(format!("{} entries is not a square matrix", r.len())))
                    .map_err(|e| e.at_sample(i));
            }
            ManifoldPoint::spd(DMatrix::from_row_slice(n, n, r)).map_err(|e| e.at_sample(i))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((points, labels))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpdJsonItem {
    Labeled { label: usize, matrix: Vec<Vec<f64>> },
    Bare(Vec<Vec<f64>>),
}

pub fn read_spd_json(text: &str) -> Result<(Vec<ManifoldPoint>, Option<Vec<usize>>)> {
    let items: Vec<SpdJsonItem> = serde_json::from_str(text)?;
    let mut points = Vec::with_capacity(items.len());
    let mut labels = Vec::new();
    for (i, item) in items.into_iter().enumerate() {
        let rows = match item {
            SpdJsonItem::Labeled { label, matrix } => {
                labels.push(label);
                matrix
            }
            SpdJsonItem::Bare(m) => m,
        };
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("matrix is not square".into()).at_sample(i));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        points.push(ManifoldPoint::spd(DMatrix::from_row_slice(n, n, &flat)).map_err(|e| e.at_sample(i))?);
    }
    match labels.len() {
        0 => Ok((points, None)),
        l if l == points.len() => Ok((points, Some(labels))),
        _ => Err(Error::Parse("either all or no SPD items carry labels".into())),
    }
}
