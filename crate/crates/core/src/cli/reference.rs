//! Published reference values shipped with the binary.

use serde::Deserialize;

use crate::error::Result;

const REFERENCE_JSON: &str = include_str!("../../data/reference.json");

#[derive(Debug, Clone, Deserialize)]
pub struct Reference {
    pub table1: Table1,
    pub table2: Table2,
    pub table3: Table3,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Table1 {
    pub mu: f64,
    pub rows: Vec<Table1Row>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Table1Row {
    pub rho: f64,
    pub r1: f64,
    pub r2: f64,
    pub d_sim: f64,
    pub d_min: f64,
    pub d_sim_1: f64,
    pub d_sim_2: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Table2 {
    pub r1: f64,
    pub r2: f64,
    pub mu: f64,
    pub rho: f64,
    pub rows: Vec<Table2Row>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Table2Row {
    pub p: f64,
    pub d_side: f64,
    pub d_central: f64,
    pub d_av: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Table3 {
    pub rho: f64,
    pub rows: Vec<Table3Row>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Table3Row {
    pub mu: f64,
    pub r1: f64,
    pub r2: f64,
    pub d_sim: f64,
    pub d_min: f64,
}

pub fn reference() -> Result<Reference> {
    Ok(serde_json::from_str(REFERENCE_JSON)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_tables_parse() {
        let r = reference().unwrap();
        assert_eq!(r.table1.rows.len(), 8);
        assert_eq!(r.table2.rows.len(), 6);
        assert_eq!(r.table3.rows.len(), 7);
        assert_eq!(r.table2.rows[5].p, 0.0);
        assert_eq!(r.table3.rows[3].d_min, r.table1.rows[4].d_min);
    }
}
