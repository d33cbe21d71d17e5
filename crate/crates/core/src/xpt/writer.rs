//! Minimal XPORT v5 writer used to generate test fixtures.

use super::document::*;
use super::ibm::ieee_to_ibm;
use super::XptError;

fn field(out: &mut Vec<u8>, s: &str, width: usize) {
    let b = s.as_bytes();
    let n = b.len().min(width);
    out.extend_from_slice(&b[..n]);
    out.resize(out.len() + width - n, b' ');
}

fn card(out: &mut Vec<u8>, parts: &[(&str, usize)]) {
    let start = out.len();
    for (s, w) in parts {
        field(out, s, *w);
    }
    assert!(out.len() - start <= RECORD);
    out.resize(start + RECORD, b' ');
}

fn magic(out: &mut Vec<u8>, magic: &[u8], tail: &str) {
    let start = out.len();
    out.extend_from_slice(magic);
    out.extend_from_slice(tail.as_bytes());
    out.resize(start + RECORD, b' ');
}

fn pad_block(out: &mut Vec<u8>, start: usize) {
    let len = out.len() - start;
    out.resize(start + len.div_ceil(RECORD) * RECORD, b' ');
}

fn namestr(out: &mut Vec<u8>, v: &NamestrEntry) {
    let start = out.len();
    let ty: u16 = match v.var_type {
        VarType::Numeric => 1,
        VarType::Character => 2,
    };
    for x in [ty, 0, v.length as u16, v.varnum] {
        out.extend_from_slice(&x.to_be_bytes());
    }
    field(out, &v.name, 8);
    field(out, &v.label, 40);
    field(out, &v.format, 8);
    for x in [v.format_length, v.format_decimals, v.format_justify] {
        out.extend_from_slice(&x.to_be_bytes());
    }
    out.extend_from_slice(&[0, 0]);
    field(out, &v.informat, 8);
    for x in [v.informat_length, v.informat_decimals] {
        out.extend_from_slice(&x.to_be_bytes());
    }
    out.extend_from_slice(&(v.position as i32).to_be_bytes());
    out.resize(start + NAMESTR_LEN, 0);
}

fn cell(out: &mut Vec<u8>, v: &NamestrEntry, value: &XptValue) -> Result<(), XptError> {
    match (v.var_type, value) {
        (VarType::Numeric, XptValue::Number(x)) => {
            let enc = ieee_to_ibm(*x).ok_or(XptError::Unrepresentable(*x))?;
            out.extend_from_slice(&enc[..v.length]);
        }
        (VarType::Numeric, XptValue::Missing(tag)) => {
            out.push(*tag as u8);
            out.resize(out.len() + v.length - 1, 0);
        }
        (VarType::Character, XptValue::Text(s)) => field(out, s, v.length),
        _ => return Err(XptError::TypeMismatch(v.name.clone())),
    }
    Ok(())
}

/// Serializes a document. Variables must be listed in row-position order.
pub fn write_document(doc: &XptDocument) -> Result<Vec<u8>, XptError> {
    let mut out = Vec::new();
    magic(&mut out, LIBRARY_MAGIC, &"0".repeat(30));
    card(
        &mut out,
        &[("SAS", 8), ("SAS", 8), ("SASLIB", 8), (&doc.sas_version, 8), (&doc.os, 8), ("", 24), (&doc.created, 16)],
    );
    card(&mut out, &[(&doc.modified, 16)]);
    for m in &doc.members {
        magic(&mut out, MEMBER_MAGIC, "000000000000000001600000000140");
        magic(&mut out, DSCRPTR_MAGIC, &"0".repeat(30));
        card(
            &mut out,
            &[("SAS", 8), (&m.name, 8), ("SASDATA", 8), (&m.sas_version, 8), (&m.os, 8), ("", 24), (&m.created, 16)],
        );
        card(&mut out, &[(&m.modified, 16), ("", 16), (&m.label, 40), (&m.dataset_type, 8)]);
        magic(&mut out, NAMESTR_MAGIC, &format!("000000{:04}00000000000000000000", m.variables.len()));
        let start = out.len();
        for v in &m.variables {
            namestr(&mut out, v);
        }
        pad_block(&mut out, start);
        magic(&mut out, OBS_MAGIC, &"0".repeat(30));
        let start = out.len();
        for row in &m.rows {
            if row.len() != m.variables.len() {
                return Err(XptError::TypeMismatch(format!("row of {} cells in {}", row.len(), m.name)));
            }
            for (v, value) in m.variables.iter().zip(row) {
                cell(&mut out, v, value)?;
            }
        }
        pad_block(&mut out, start);
    }
    Ok(out)
}
