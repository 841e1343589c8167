//! Versioned text formats for datasets, augmented datasets, models and
//! reports. Numbers are written in shortest round-trip decimal, so every
//! format reloads bit-for-bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::augmentation::{Alternative, AugmentedAction, AugmentedSegment};
use crate::engine::TrainedModel;
use crate::engine::ModelParameters;
use crate::error::{Error, Result};
use crate::features::{ActionSequence, ClassId, Dataset, FeatureVector};
use crate::scalar::Scalar;

use super::experiment::{ExperimentMetrics, ExperimentReport, RuntimeStats};
use super::metrics::{AlternativeQuality, ConfusionMatrix, ReplacementStats};

pub const DATASET_HEADER: &str = "ahcrf-dataset v1";
pub const AUGMENTED_HEADER: &str = "ahcrf-augmented v1";
pub const MODEL_HEADER: &str = "ahcrf-model v1";
pub const REPORT_HEADER: &str = "# ahcrf-report v1";

const NONE: &str = "-";

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l))
            }
            None => Err(Error::parse(self.last + 1, format!("unexpected end of file, expected {what}"))),
        }
    }

    fn finish(&mut self) -> Result<()> {
        for (i, l) in self.inner.by_ref() {
            if !l.trim().is_empty() {
                return Err(Error::parse(i + 1, "trailing content"));
            }
        }
        Ok(())
    }
}

fn check_header(lines: &mut Lines, expected: &str) -> Result<()> {
    let (n, line) = lines.next("header")?;
    let line = line.trim();
    if line == expected {
        return Ok(());
    }
    let kind = expected.rsplit_once(' ').map_or(expected, |(k, _)| k);
    match line.rsplit_once(' ') {
        Some((k, v)) if k == kind => Err(Error::Version {
            found: v.to_string(),
            expected: expected[kind.len() + 1..].to_string(),
        }),
        _ => Err(Error::parse(n, format!("expected header `{expected}`"))),
    }
}

/// Parses `key=value` fields of a record line in the given order.
fn fields<'a>(n: usize, line: &'a str, tag: &str, keys: &[&str]) -> Result<Vec<&'a str>> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(tag) {
        return Err(Error::parse(n, format!("expected `{tag}` record")));
    }
    let mut out = Vec::with_capacity(keys.len());
    for key in keys {
        let part = parts
            .next()
            .ok_or_else(|| Error::parse(n, format!("missing field `{key}`")))?;
        match part.split_once('=') {
            Some((k, v)) if k == *key => out.push(v),
            _ => return Err(Error::parse(n, format!("expected `{key}=...`, got `{part}`"))),
        }
    }
    if let Some(extra) = parts.next() {
        return Err(Error::parse(n, format!("unexpected field `{extra}`")));
    }
    Ok(out)
}

fn keyed<'a>(n: usize, line: &'a str, key: &str) -> Result<&'a str> {
    line.trim()
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| Error::parse(n, format!("expected `{key}=...`")))
}

fn number<V: std::str::FromStr>(n: usize, s: &str, what: &str) -> Result<V> {
    s.parse()
        .map_err(|_| Error::parse(n, format!("bad {what} `{s}`")))
}

fn write_row<T: Scalar>(out: &mut String, values: &[T]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

fn read_row<T: Scalar>(lines: &mut Lines, len: usize, what: &str) -> Result<Vec<T>> {
    let (n, line) = lines.next(what)?;
    let values: Vec<T> = line
        .split(',')
        .map(|s| {
            let s = s.trim();
            match s.parse::<T>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::parse(n, format!("bad number `{s}` in {what}"))),
            }
        })
        .collect::<Result<_>>()?;
    if values.len() != len {
        return Err(Error::parse(n, format!("{what} has {} values, expected {len}", values.len())));
    }
    Ok(values)
}

fn check_name(kind: &str, name: &str) -> Result<()> {
    if name.is_empty() || name == NONE || name.contains(|c: char| c.is_whitespace() || c == ',' || c == '=') {
        return Err(Error::invalid(format!(
            "{kind} `{name}` must be non-empty, not `-`, and free of whitespace, ',' and '='"
        )));
    }
    Ok(())
}

fn write_classes(out: &mut String, classes: &[String]) -> Result<()> {
    for c in classes {
        check_name("class name", c)?;
    }
    let _ = writeln!(out, "classes={}", classes.join(","));
    Ok(())
}

fn read_classes(lines: &mut Lines) -> Result<Vec<String>> {
    let (n, line) = lines.next("class table")?;
    let v = keyed(n, line, "classes")?;
    if v.is_empty() {
        return Ok(Vec::new());
    }
    Ok(v.split(',').map(str::to_string).collect())
}

fn label_name(classes: &[String], label: Option<ClassId>) -> &str {
    label.map_or(NONE, |y| classes[y].as_str())
}

fn parse_label(n: usize, classes: &[String], s: &str) -> Result<Option<ClassId>> {
    if s == NONE {
        return Ok(None);
    }
    classes
        .iter()
        .position(|c| c == s)
        .map(Some)
        .ok_or_else(|| Error::parse(n, format!("unknown class `{s}`")))
}

fn mask_string(mask: Option<&[bool]>) -> String {
    match mask {
        None => NONE.to_string(),
        Some(m) => m.iter().map(|&b| if b { '1' } else { '0' }).collect(),
    }
}

fn parse_mask(n: usize, s: &str, len: usize) -> Result<Option<Vec<bool>>> {
    if s == NONE {
        return Ok(None);
    }
    let m: Vec<bool> = s
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::parse(n, format!("bad mask `{s}`"))),
        })
        .collect::<Result<_>>()?;
    if m.len() != len {
        return Err(Error::parse(n, format!("mask has {} entries, expected {len}", m.len())));
    }
    Ok(Some(m))
}

fn shape_line<T: Scalar>(actions: usize, first: Option<&ActionSequence<T>>) -> String {
    let (t, d) = first.map_or((0, 0), |a| (a.len(), a.segments.first().map_or(0, |s| s.0.len())));
    format!("actions={actions} segments={t} dim={d}")
}

fn read_shape(lines: &mut Lines) -> Result<(usize, usize, usize)> {
    let (n, line) = lines.next("shape line")?;
    let mut parts = line.split_whitespace();
    let mut get = |key: &str| -> Result<usize> {
        let part = parts.next().unwrap_or("");
        let v = part
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| Error::parse(n, format!("expected `{key}=...`")))?;
        number(n, v, key)
    };
    Ok((get("actions")?, get("segments")?, get("dim")?))
}

pub fn write_dataset<T: Scalar>(dataset: &Dataset<T>) -> Result<String> {
    dataset.validate()?;
    let mut out = String::new();
    out.push_str(DATASET_HEADER);
    out.push('\n');
    write_classes(&mut out, &dataset.classes)?;
    out.push_str(&shape_line(dataset.actions.len(), dataset.actions.first()));
    out.push('\n');
    for a in &dataset.actions {
        check_name("action id", &a.id)?;
        let _ = writeln!(
            out,
            "action id={} label={} mask={}",
            a.id,
            label_name(&dataset.classes, a.label),
            mask_string(a.known_outlier_mask.as_deref())
        );
        for s in &a.segments {
            write_row(&mut out, s.as_slice());
        }
    }
    Ok(out)
}

pub fn read_dataset<T: Scalar>(text: &str) -> Result<Dataset<T>> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, DATASET_HEADER)?;
    let classes = read_classes(&mut lines)?;
    let (count, t, d) = read_shape(&mut lines)?;
    let mut actions = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, line) = lines.next("action record")?;
        let f = fields(n, line, "action", &["id", "label", "mask"])?;
        let label = parse_label(n, &classes, f[1])?;
        let mask = parse_mask(n, f[2], t)?;
        let segments = (0..t)
            .map(|_| read_row(&mut lines, d, "segment").map(FeatureVector))
            .collect::<Result<_>>()?;
        let mut a = ActionSequence::new(f[0], segments, label);
        a.known_outlier_mask = mask;
        actions.push(a);
    }
    lines.finish()?;
    Dataset::new(classes, actions)
}

pub fn write_augmented<T: Scalar>(classes: &[String], actions: &[AugmentedAction<T>]) -> Result<String> {
    let mut out = String::new();
    out.push_str(AUGMENTED_HEADER);
    out.push('\n');
    write_classes(&mut out, classes)?;
    let (t, d) = actions.first().map_or((0, 0), |a| (a.len(), a.dim()));
    let _ = writeln!(out, "actions={} segments={t} dim={d}", actions.len());
    let name = |label: Option<ClassId>| -> Result<&str> {
        match label {
            Some(y) if y >= classes.len() => Err(Error::invalid(format!("label {y} outside the class table"))),
            _ => Ok(label_name(classes, label)),
        }
    };
    for a in actions {
        check_name("action id", &a.id)?;
        if a.len() != t || a.dim() != d {
            return Err(Error::invalid(format!("action {} differs in shape", a.id)));
        }
        let _ = writeln!(
            out,
            "action id={} label={} mask={}",
            a.id,
            name(a.label)?,
            mask_string(a.known_outlier_mask.as_deref())
        );
        for seg in &a.segments {
            let _ = writeln!(
                out,
                "segment alternatives={} original={}",
                seg.alternatives.len(),
                u8::from(seg.original_allowed)
            );
            write_row(&mut out, seg.original.as_slice());
            for alt in &seg.alternatives {
                check_name("source id", &alt.source_action_id)?;
                let _ = writeln!(
                    out,
                    "alt recommender={} source={} position={} label={}",
                    alt.recommender,
                    alt.source_action_id,
                    alt.source_position,
                    name(alt.source_label)?
                );
                write_row(&mut out, alt.vector.as_slice());
            }
        }
    }
    Ok(out)
}

pub fn read_augmented<T: Scalar>(text: &str) -> Result<(Vec<String>, Vec<AugmentedAction<T>>)> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, AUGMENTED_HEADER)?;
    let classes = read_classes(&mut lines)?;
    let (count, t, d) = read_shape(&mut lines)?;
    let mut actions = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, line) = lines.next("action record")?;
        let f = fields(n, line, "action", &["id", "label", "mask"])?;
        let label = parse_label(n, &classes, f[1])?;
        let mask = parse_mask(n, f[2], t)?;
        let mut segments = Vec::with_capacity(t);
        for _ in 0..t {
            let (n, line) = lines.next("segment record")?;
            let sf = fields(n, line, "segment", &["alternatives", "original"])?;
            let k: usize = number(n, sf[0], "alternative count")?;
            let original_allowed = match sf[1] {
                "1" => true,
                "0" => false,
                other => return Err(Error::parse(n, format!("bad original flag `{other}`"))),
            };
            let original = FeatureVector(read_row(&mut lines, d, "segment")?);
            let mut alternatives = Vec::with_capacity(k);
            for _ in 0..k {
                let (n, line) = lines.next("alternative record")?;
                let af = fields(n, line, "alt", &["recommender", "source", "position", "label"])?;
                alternatives.push(Alternative {
                    recommender: number(n, af[0], "recommender")?,
                    source_action_id: af[1].to_string(),
                    source_position: number(n, af[2], "position")?,
                    source_label: parse_label(n, &classes, af[3])?,
                    vector: FeatureVector(read_row(&mut lines, d, "alternative")?),
                });
            }
            if !original_allowed && alternatives.is_empty() {
                return Err(Error::parse(n, "segment forbids its original but has no alternatives"));
            }
            segments.push(AugmentedSegment {
                original,
                alternatives,
                original_allowed,
            });
        }
        actions.push(AugmentedAction {
            id: f[0].to_string(),
            label,
            segments,
            known_outlier_mask: mask,
        });
    }
    lines.finish()?;
    Ok((classes, actions))
}

pub fn write_model<T: Scalar>(model: &TrainedModel<T>) -> Result<String> {
    let p = &model.params;
    if model.classes.len() != p.num_classes() {
        return Err(Error::invalid("class table does not match the parameters"));
    }
    let mut out = String::new();
    out.push_str(MODEL_HEADER);
    out.push('\n');
    write_classes(&mut out, &model.classes)?;
    let _ = writeln!(out, "poses={}", p.num_poses());
    let _ = writeln!(out, "dim={}", p.dim());
    let _ = writeln!(out, "epsilon={}", p.epsilon());
    let _ = writeln!(out, "sigma={}", model.sigma);
    out.push_str("lambda\n");
    for k in 0..p.num_poses() {
        write_row(&mut out, p.pose(k));
    }
    out.push_str("theta2\n");
    for y in 0..p.num_classes() {
        let row: Vec<T> = (0..p.num_poses()).map(|a| p.theta2(y, a)).collect();
        write_row(&mut out, &row);
    }
    out.push_str("theta3\n");
    for y in 0..p.num_classes() {
        for a in 0..p.num_poses() {
            let row: Vec<T> = (0..p.num_poses()).map(|b| p.theta3(y, a, b)).collect();
            write_row(&mut out, &row);
        }
    }
    Ok(out)
}

pub fn read_model<T: Scalar>(text: &str) -> Result<TrainedModel<T>> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, MODEL_HEADER)?;
    let classes = read_classes(&mut lines)?;
    let mut scalar_field = |key: &str| -> Result<(usize, String)> {
        let (n, line) = lines.next(key)?;
        Ok((n, keyed(n, line, key)?.to_string()))
    };
    let (n, s) = scalar_field("poses")?;
    let poses: usize = number(n, &s, "pose count")?;
    let (n, s) = scalar_field("dim")?;
    let dim: usize = number(n, &s, "dimension")?;
    let (ne, s) = scalar_field("epsilon")?;
    let epsilon: T = number(ne, &s, "epsilon")?;
    let (ns, s) = scalar_field("sigma")?;
    let sigma: T = number(ns, &s, "sigma")?;
    if !(sigma > T::zero()) {
        return Err(Error::parse(ns, "sigma must be positive"));
    }
    let ny = classes.len();
    let mut weights = Vec::with_capacity(ModelParameters::<T>::weight_count(ny, poses, dim));
    let mut section = |lines: &mut Lines, name: &str, rows: usize, cols: usize| -> Result<()> {
        let (n, line) = lines.next(name)?;
        if line.trim() != name {
            return Err(Error::parse(n, format!("expected section `{name}`")));
        }
        for _ in 0..rows {
            weights.extend(read_row::<T>(lines, cols, name)?);
        }
        Ok(())
    };
    section(&mut lines, "lambda", poses, dim)?;
    section(&mut lines, "theta2", ny, poses)?;
    section(&mut lines, "theta3", ny * poses, poses)?;
    lines.finish()?;
    let params = ModelParameters::from_weights(ny, poses, dim, epsilon, weights)
        .map_err(|e| Error::parse(ne, e.to_string()))?;
    Ok(TrainedModel { params, sigma, classes })
}

const REPORT_COLUMNS: &str = "task,method,ratio,accuracy,alt_mean_accurate,alt_at_least_one,correct_replacement,\
alt_segments,alt_accurate_sum,alt_with_accurate,replaced,replaced_correct,epsilon,folds,test_queries,confusion,\
train_seconds,predict_seconds";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// CSV with one row per report. Undefined statistics are written as `NA`.
pub fn write_reports(reports: &[ExperimentReport]) -> String {
    let mut out = String::new();
    out.push_str(REPORT_HEADER);
    out.push('\n');
    out.push_str(REPORT_COLUMNS);
    out.push('\n');
    for r in reports {
        let m = &r.metrics;
        let q = &m.alternative_quality;
        let eps: Vec<String> = m.epsilon.iter().map(f64::to_string).collect();
        let confusion: Vec<String> = m
            .confusion
            .counts
            .iter()
            .map(|row| row.iter().map(usize::to_string).collect::<Vec<_>>().join(" "))
            .collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            m.task,
            m.method,
            m.ratio,
            m.accuracy,
            opt(q.mean_accurate_fraction()),
            opt(q.at_least_one()),
            opt(m.replacement.probability()),
            q.segments,
            q.accurate_fraction_sum,
            q.with_accurate,
            m.replacement.replaced,
            m.replacement.correct,
            eps.join(";"),
            m.folds,
            m.test_queries,
            confusion.join(";"),
            r.runtime.train_seconds,
            r.runtime.predict_seconds,
        );
    }
    out
}

pub fn read_reports(text: &str) -> Result<Vec<ExperimentReport>> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, REPORT_HEADER)?;
    let (n, cols) = lines.next("column names")?;
    if cols.trim() != REPORT_COLUMNS {
        return Err(Error::parse(n, "unexpected report columns"));
    }
    let mut out = Vec::new();
    while let Ok((n, line)) = lines.next("report row") {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 18 {
            return Err(Error::parse(n, format!("expected 18 columns, got {}", f.len())));
        }
        let epsilon = if f[12].is_empty() {
            Vec::new()
        } else {
            f[12].split(';').map(|s| number(n, s, "epsilon")).collect::<Result<_>>()?
        };
        let counts = f[15]
            .split(';')
            .filter(|r| !r.is_empty())
            .map(|row| row.split(' ').map(|c| number(n, c, "confusion count")).collect::<Result<Vec<usize>>>())
            .collect::<Result<Vec<_>>>()?;
        out.push(ExperimentReport {
            metrics: ExperimentMetrics {
                task: f[0].parse().map_err(|e: Error| Error::parse(n, e.to_string()))?,
                method: f[1].parse().map_err(|e: Error| Error::parse(n, e.to_string()))?,
                ratio: number(n, f[2], "ratio")?,
                accuracy: number(n, f[3], "accuracy")?,
                alternative_quality: AlternativeQuality {
                    segments: number(n, f[7], "segment count")?,
                    accurate_fraction_sum: number(n, f[8], "accurate sum")?,
                    with_accurate: number(n, f[9], "count")?,
                },
                replacement: ReplacementStats {
                    replaced: number(n, f[10], "count")?,
                    correct: number(n, f[11], "count")?,
                },
                epsilon,
                folds: number(n, f[13], "fold count")?,
                test_queries: number(n, f[14], "query count")?,
                confusion: ConfusionMatrix { counts },
            },
            runtime: RuntimeStats {
                train_seconds: number(n, f[16], "seconds")?,
                predict_seconds: number(n, f[17], "seconds")?,
            },
        });
    }
    Ok(out)
}

pub fn save(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| file_error(path, source))
}

fn file_error(path: &Path, source: std::io::Error) -> Error {
    Error::File {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| file_error(path, source))
}
