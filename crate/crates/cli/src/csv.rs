//! CSV emission. Floats use Rust's shortest round-trip formatting.

use std::fmt::Write;

pub const SWEEP_HEADER: &str = "sweep_value,branch_index,n,X_M,delta_tilde,stability,fold_flag";
pub const STEADY_HEADER: &str = "branch_index,n,c_s,X_M,delta_tilde,residual,fold_flag,stability,max_re_lambda";
pub const SPECTRUM_HEADER: &str =
    "omega,S_XM,S_Xc,S_Pc,S_XM_closed_form,S_Xc_closed_form,S_Pc_closed_form,S_Xc_corrected,S_Pc_corrected";
pub const LINEAR_TRAJECTORY_HEADER: &str = "t,X_M,P_M,X,P";
pub const MEANFIELD_TRAJECTORY_HEADER: &str = "t,X_M,P_M,Re_c,Im_c,n";
pub const PERIODOGRAM_HEADER: &str = "omega,S_XM_welch,S_XM_transfer";

pub fn all_headers() -> [(&'static str, &'static str); 6] {
    [
        ("sweep.csv", SWEEP_HEADER),
        ("steady.csv", STEADY_HEADER),
        ("spectrum.csv", SPECTRUM_HEADER),
        ("trajectory.csv (linear)", LINEAR_TRAJECTORY_HEADER),
        ("trajectory.csv (meanfield)", MEANFIELD_TRAJECTORY_HEADER),
        ("periodogram.csv", PERIODOGRAM_HEADER),
    ]
}

/// A CSV cell.
pub enum Cell<'a> {
    F(f64),
    U(usize),
    S(&'a str),
    Empty,
}

pub struct Table {
    buf: String,
    columns: usize,
}

impl Table {
    pub fn new(header: &str) -> Self {
        Self { buf: format!("{header}\n"), columns: header.split(',').count() }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        debug_assert_eq!(cells.len(), self.columns);
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            match c {
                Cell::F(v) => write!(self.buf, "{v:?}").unwrap(),
                Cell::U(v) => write!(self.buf, "{v}").unwrap(),
                Cell::S(s) => self.buf.push_str(s),
                Cell::Empty => {}
            }
        }
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}
