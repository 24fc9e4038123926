//! Classified-map export: an 8-bit PGM preview and an exact `row,col,label` CSV.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("map has {found} labels, expected {expected}")]
    Size { expected: usize, found: usize },
    #[error("label {0} does not fit an 8-bit gray ramp")]
    LabelTooLarge(u16),
    #[error("map csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// Gray level of a class: `floor(255 * label / max_label)`. Distinct for
/// distinct labels whenever `max_label <= 255`.
pub fn gray_level(label: u16, max_label: u16) -> u8 {
    if max_label == 0 {
        return 0;
    }
    ((255 * label as u32) / max_label as u32) as u8
}

/// Binary (P5) PGM of a row-major label raster.
pub fn encode_pgm(labels: &[u16], samples: usize, lines: usize, max_label: u16) -> Result<Vec<u8>, MapError> {
    if labels.len() != samples * lines {
        return Err(MapError::Size {
            expected: samples * lines,
            found: labels.len(),
        });
    }
    if max_label > 255 {
        return Err(MapError::LabelTooLarge(max_label));
    }
    let mut out = format!("P5\n{samples} {lines}\n255\n").into_bytes();
    out.extend(labels.iter().map(|&l| gray_level(l, max_label)));
    Ok(out)
}

pub fn encode_csv(labels: &[u16], samples: usize, lines: usize) -> Result<String, MapError> {
    if labels.len() != samples * lines {
        return Err(MapError::Size {
            expected: samples * lines,
            found: labels.len(),
        });
    }
    let mut out = String::from("row,col,label\n");
    for (p, l) in labels.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", p / samples, p % samples, l));
    }
    Ok(out)
}

/// Parses `row,col,label` lines (header optional) into a `samples x lines`
/// raster. Every pixel must appear exactly once.
pub fn decode_csv(text: &str, samples: usize, lines: usize) -> Result<Vec<u16>, MapError> {
    let mut labels = vec![None; samples * lines];
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || (line_no == 1 && line.starts_with("row")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let err = |reason: String| MapError::Csv { line: line_no, reason };
        if fields.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", fields.len())));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| err(format!("not an integer: {s:?}")));
        let (row, col) = (parse(fields[0])?, parse(fields[1])?);
        let label: u16 = fields[2]
            .parse()
            .map_err(|_| err(format!("not a label: {:?}", fields[2])))?;
        if row >= lines || col >= samples {
            return Err(err(format!("pixel ({row}, {col}) outside {samples}x{lines} raster")));
        }
        let slot = &mut labels[row * samples + col];
        if slot.is_some() {
            return Err(err(format!("pixel ({row}, {col}) listed twice")));
        }
        *slot = Some(label);
    }
    let found = labels.iter().filter(|l| l.is_some()).count();
    if found != labels.len() {
        return Err(MapError::Size {
            expected: labels.len(),
            found,
        });
    }
    Ok(labels.into_iter().map(|l| l.expect("checked")).collect())
}
