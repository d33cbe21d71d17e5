use serde::{Deserialize, Serialize};

use super::ibm::{ibm_to_ieee_truncated, IbmValue};
use super::XptError;

pub const RECORD: usize = 80;
pub const NAMESTR_LEN: usize = 140;

pub(crate) const LIBRARY_MAGIC: &[u8] = b"HEADER RECORD*******LIBRARY HEADER RECORD!!!!!!!";
pub(crate) const LIBRARY_V8_MAGIC: &[u8] = b"HEADER RECORD*******LIBV8   HEADER RECORD!!!!!!!";
pub(crate) const MEMBER_MAGIC: &[u8] = b"HEADER RECORD*******MEMBER  HEADER RECORD!!!!!!!";
pub(crate) const MEMBER_V8_MAGIC: &[u8] = b"HEADER RECORD*******MEMBV8  HEADER RECORD!!!!!!!";
pub(crate) const DSCRPTR_MAGIC: &[u8] = b"HEADER RECORD*******DSCRPTR HEADER RECORD!!!!!!!";
pub(crate) const NAMESTR_MAGIC: &[u8] = b"HEADER RECORD*******NAMESTR HEADER RECORD!!!!!!!";
pub(crate) const OBS_MAGIC: &[u8] = b"HEADER RECORD*******OBS     HEADER RECORD!!!!!!!";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarType {
    Numeric,
    Character,
}

/// One variable description (140-byte namestr record).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamestrEntry {
    pub name: String,
    pub var_type: VarType,
    pub length: usize,
    pub varnum: u16,
    pub label: String,
    pub format: String,
    pub format_length: u16,
    pub format_decimals: u16,
    pub format_justify: u16,
    pub informat: String,
    pub informat_length: u16,
    pub informat_decimals: u16,
    /// Byte offset inside an observation row.
    pub position: usize,
}

impl NamestrEntry {
    pub fn numeric(name: &str, varnum: u16, position: usize) -> Self {
        NamestrEntry {
            name: name.into(),
            var_type: VarType::Numeric,
            length: 8,
            varnum,
            label: String::new(),
            format: String::new(),
            format_length: 0,
            format_decimals: 0,
            format_justify: 0,
            informat: String::new(),
            informat_length: 0,
            informat_decimals: 0,
            position,
        }
    }

    pub fn character(name: &str, varnum: u16, position: usize, length: usize) -> Self {
        NamestrEntry { var_type: VarType::Character, length, ..Self::numeric(name, varnum, position) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum XptValue {
    Number(f64),
    Missing(char),
    Text(String),
}

impl XptValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            XptValue::Number(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XptMember {
    pub name: String,
    pub sas_version: String,
    pub os: String,
    pub created: String,
    pub modified: String,
    pub label: String,
    pub dataset_type: String,
    pub variables: Vec<NamestrEntry>,
    pub rows: Vec<Vec<XptValue>>,
}

impl XptMember {
    pub fn row_width(&self) -> usize {
        self.variables.iter().map(|v| v.length).sum()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XptDocument {
    pub sas_version: String,
    pub os: String,
    pub created: String,
    pub modified: String,
    pub members: Vec<XptMember>,
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).trim_end_matches([' ', '\0']).to_string()
}

fn be16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn record(&mut self) -> Result<&'a [u8], XptError> {
        let end = self.offset + RECORD;
        if end > self.bytes.len() {
            return Err(XptError::TruncatedRecord { offset: self.offset });
        }
        let r = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(r)
    }

    fn expect(&mut self, magic: &'static [u8], name: &'static str) -> Result<&'a [u8], XptError> {
        let at = self.offset;
        let r = self.record()?;
        if !r.starts_with(magic) {
            return Err(XptError::BadMagic { offset: at, expected: name });
        }
        Ok(r)
    }
}

fn parse_namestr(b: &[u8], offset: usize) -> Result<NamestrEntry, XptError> {
    let malformed = |reason: String| XptError::MalformedNamestr { offset, reason };
    let var_type = match be16(&b[0..2]) {
        1 => VarType::Numeric,
        2 => VarType::Character,
        t => return Err(malformed(format!("variable type {t}"))),
    };
    let length = be16(&b[4..6]) as usize;
    let name = text(&b[8..16]);
    if name.is_empty() {
        return Err(malformed("empty variable name".into()));
    }
    if length == 0 || (var_type == VarType::Numeric && !(2..=8).contains(&length)) {
        return Err(malformed(format!("{name}: length {length}")));
    }
    let position = i32::from_be_bytes([b[84], b[85], b[86], b[87]]);
    if position < 0 {
        return Err(malformed(format!("{name}: negative position {position}")));
    }
    Ok(NamestrEntry {
        name,
        var_type,
        length,
        varnum: be16(&b[6..8]),
        label: text(&b[16..56]),
        format: text(&b[56..64]),
        format_length: be16(&b[64..66]),
        format_decimals: be16(&b[66..68]),
        format_justify: be16(&b[68..70]),
        informat: text(&b[72..80]),
        informat_length: be16(&b[80..82]),
        informat_decimals: be16(&b[82..84]),
        position: position as usize,
    })
}

fn decode_row(row: &[u8], vars: &[NamestrEntry]) -> Vec<XptValue> {
    vars.iter()
        .map(|v| {
            let cell = &row[v.position..v.position + v.length];
            match v.var_type {
                VarType::Numeric => match ibm_to_ieee_truncated(cell) {
                    IbmValue::Number(x) => XptValue::Number(x),
                    IbmValue::Missing(tag) => XptValue::Missing(tag as char),
                },
                VarType::Character => XptValue::Text(text(cell)),
            }
        })
        .collect()
}

/// Parses a complete XPORT v5 byte stream.
pub fn parse_document(bytes: &[u8]) -> Result<XptDocument, XptError> {
    let mut cur = Cursor { bytes, offset: 0 };
    let first = cur.record()?;
    if first.starts_with(LIBRARY_V8_MAGIC) {
        return Err(XptError::UnsupportedVersion { offset: 0 });
    }
    if !first.starts_with(LIBRARY_MAGIC) {
        return Err(XptError::BadMagic { offset: 0, expected: "library header" });
    }
    let real = cur.record()?;
    let modified = cur.record()?;
    let mut doc = XptDocument {
        sas_version: text(&real[24..32]),
        os: text(&real[32..40]),
        created: text(&real[64..80]),
        modified: text(&modified[0..16]),
        members: Vec::new(),
    };

    while cur.offset < bytes.len() {
        let at = cur.offset;
        let head = cur.record()?;
        if head.starts_with(MEMBER_V8_MAGIC) {
            return Err(XptError::UnsupportedVersion { offset: at });
        }
        if !head.starts_with(MEMBER_MAGIC) {
            return Err(XptError::BadMagic { offset: at, expected: "member header" });
        }
        let nlen = text(&head[74..78]);
        if nlen != "0140" {
            return Err(XptError::MalformedNamestr { offset: at, reason: format!("namestr size {nlen:?}") });
        }
        cur.expect(DSCRPTR_MAGIC, "descriptor header")?;
        let d1 = cur.record()?;
        let d2 = cur.record()?;
        let ns_at = cur.offset;
        let ns = cur.expect(NAMESTR_MAGIC, "namestr header")?;
        let count: usize = std::str::from_utf8(&ns[54..58])
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| XptError::MalformedNamestr { offset: ns_at, reason: "variable count".into() })?;

        let start = cur.offset;
        let block = count * NAMESTR_LEN;
        let padded = block.div_ceil(RECORD) * RECORD;
        if start + padded > bytes.len() {
            return Err(XptError::TruncatedRecord { offset: start });
        }
        let mut variables = Vec::with_capacity(count);
        for k in 0..count {
            let off = start + k * NAMESTR_LEN;
            variables.push(parse_namestr(&bytes[off..off + NAMESTR_LEN], off)?);
        }
        cur.offset = start + padded;
        let width: usize = variables.iter().map(|v| v.length).sum();
        for v in &variables {
            if v.position + v.length > width {
                return Err(XptError::MalformedNamestr {
                    offset: start,
                    reason: format!("{} overruns the {width}-byte row", v.name),
                });
            }
        }
        cur.expect(OBS_MAGIC, "observation header")?;

        // Observations run until the next member header or the end of input.
        let obs_start = cur.offset;
        let mut obs_end = obs_start;
        while obs_end + RECORD <= bytes.len() && !bytes[obs_end..].starts_with(MEMBER_MAGIC) {
            obs_end += RECORD;
        }
        if obs_end < bytes.len() && !bytes[obs_end..].starts_with(MEMBER_MAGIC) {
            return Err(XptError::TruncatedRecord { offset: obs_end });
        }
        let obs = &bytes[obs_start..obs_end];
        let mut rows = Vec::new();
        if width > 0 {
            let mut n = obs.len() / width;
            // Blank rows inside the final record are padding.
            while n > 0
                && (n - 1) * width + RECORD > obs.len()
                && obs[(n - 1) * width..n * width].iter().all(|&b| b == b' ')
            {
                n -= 1;
            }
            if obs[n * width..].iter().any(|&b| b != b' ') {
                return Err(XptError::TruncatedRecord { offset: obs_start + n * width });
            }
            rows = (0..n).map(|i| decode_row(&obs[i * width..(i + 1) * width], &variables)).collect();
        }
        cur.offset = obs_end;
        doc.members.push(XptMember {
            name: text(&d1[8..16]),
            sas_version: text(&d1[24..32]),
            os: text(&d1[32..40]),
            created: text(&d1[64..80]),
            modified: text(&d2[0..16]),
            label: text(&d2[32..72]),
            dataset_type: text(&d2[72..80]),
            variables,
            rows,
        });
    }
    Ok(doc)
}
