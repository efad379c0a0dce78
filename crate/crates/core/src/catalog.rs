//! The tabulated collection of splitting schemes.
//!
//! Printed decimals are stored verbatim. Centre coefficients are derived from
//! `Σa = Σb = 1`; closed-form coefficients are evaluated from their
//! expressions. Rows whose coefficients are all rational also carry an exact
//! stage list.

use num_rational::Ratio;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::scheme::{validate, ExactStage, Scheme, Stage, TableRow, Version};

/// Number of rows in the table.
pub const CATALOG_ROWS: usize = 43;

fn cbrt2() -> f64 {
    2f64.powf(1.0 / 3.0)
}

/// Root of the second-order error norm minimisation for BABAB/ABABA.
pub fn lambda_two_stage() -> f64 {
    let r = (2.0 * 326f64.sqrt() + 36.0).powf(1.0 / 3.0);
    0.5 - r / 12.0 + 1.0 / (6.0 * r)
}

/// `a2` of the sixth-order BADADADAB scheme.
pub fn badadadab_a2() -> f64 {
    let r = (675.0 + 75.0 * 6f64.sqrt()).powf(1.0 / 3.0);
    0.5 + r / 30.0 + 5.0 / (2.0 * r)
}

struct Row {
    name: &'static str,
    id: u32,
    p: u32,
    n_f: usize,
    err: f64,
    eff: f64,
    /// Drift coefficients of the first half, centre included.
    a: Vec<f64>,
    /// `(b, c)` of the momentum stages of the first half, centre included.
    bc: Vec<(f64, f64)>,
}

fn mirror<T: Copy>(half: &[T], total: usize) -> Vec<T> {
    let mut v = half.to_vec();
    v.extend(half[..total / 2].iter().rev());
    v
}

impl Row {
    fn build(&self) -> Result<Scheme> {
        let letters: Vec<char> = self.name.chars().collect();
        let n_a = letters.iter().filter(|&&c| c == 'A').count();
        let a = mirror(&self.a, n_a);
        let bc = mirror(&self.bc, letters.len() - n_a);
        let (mut ia, mut ib) = (0, 0);
        let mut stages = Vec::with_capacity(letters.len());
        for ch in &letters {
            let st = match ch {
                'A' => {
                    ia += 1;
                    Stage::Drift { a: a[ia - 1] }
                }
                l => {
                    ib += 1;
                    let (b, c) = bc[ib - 1];
                    if (*l == 'D') != (c != 0.0) {
                        return Err(Error::scheme(format!("{}: letter/c mismatch", self.name)));
                    }
                    if c == 0.0 {
                        Stage::Kick { b }
                    } else {
                        Stage::FgKick { b, c }
                    }
                }
            };
            stages.push(st);
        }
        let mut s = Scheme::from_stages_unchecked(self.name, stages);
        s.order = Some(self.p);
        s.table = Some(TableRow {
            id: self.id,
            n_f: self.n_f,
            err: self.err,
            eff: self.eff,
        });
        validate(&s)?;
        Ok(s)
    }
}

// Family layouts. `d` marks a momentum stage `(b, c)`.

fn v5(b1: f64, c1: f64, c2: f64) -> (Vec<f64>, Vec<(f64, f64)>) {
    (vec![0.5], vec![(b1, c1), (1.0 - 2.0 * b1, c2)])
}
fn p5(a1: f64, c1: f64) -> (Vec<f64>, Vec<(f64, f64)>) {
    (vec![a1, 1.0 - 2.0 * a1], vec![(0.5, c1)])
}
fn v7(a2: f64, b1: f64, c1: f64, c2: f64) -> (Vec<f64>, Vec<(f64, f64)>) {
    (vec![a2, 1.0 - 2.0 * a2], vec![(b1, c1), (0.5 - b1, c2)])
}
fn p7(a1: f64, b1: f64, c1: f64, c2: f64) -> (Vec<f64>, Vec<(f64, f64)>) {
    (vec![a1, 0.5 - a1], vec![(b1, c1), (1.0 - 2.0 * b1, c2)])
}
#[allow(clippy::too_many_arguments)]
fn v9(a2: f64, b1: f64, b2: f64, c1: f64, c2: f64, c3: f64) -> (Vec<f64>, Vec<(f64, f64)>) {
    (
        vec![a2, 0.5 - a2],
        vec![(b1, c1), (b2, c2), (1.0 - 2.0 * (b1 + b2), c3)],
    )
}
fn p9(a1: f64, a2: f64, b1: f64, c1: f64, c2: f64) -> (Vec<f64>, Vec<(f64, f64)>) {
    (
        vec![a1, a2, 1.0 - 2.0 * (a1 + a2)],
        vec![(b1, c1), (0.5 - b1, c2)],
    )
}
#[allow(clippy::too_many_arguments)]
fn v11(a2: f64, a3: f64, b1: f64, b2: f64, c1: f64, c2: f64, c3: f64) -> (Vec<f64>, Vec<(f64, f64)>) {
    (
        vec![a2, a3, 1.0 - 2.0 * (a2 + a3)],
        vec![(b1, c1), (b2, c2), (0.5 - (b1 + b2), c3)],
    )
}
#[allow(clippy::too_many_arguments)]
fn p11(a1: f64, a2: f64, b1: f64, b2: f64, c1: f64, c2: f64, c3: f64) -> (Vec<f64>, Vec<(f64, f64)>) {
    (
        vec![a1, a2, 0.5 - (a1 + a2)],
        vec![(b1, c1), (b2, c2), (1.0 - 2.0 * (b1 + b2), c3)],
    )
}

fn rows() -> Vec<Row> {
    let lam = lambda_two_stage();
    let x = 1.0 / (2.0 - cbrt2());
    let s3 = 3f64.sqrt();
    let a6 = badadadab_a2();
    let row = |name, id, p, n_f, err, eff, (a, bc): (Vec<f64>, Vec<(f64, f64)>)| Row {
        name,
        id,
        p,
        n_f,
        err,
        eff,
        a,
        bc,
    };
    vec![
        // three stages
        row("BAB", 1, 2, 1, 0.0932, 10.73, (vec![1.0], vec![(0.5, 0.0)])),
        row("ABA", 2, 2, 1, 0.0932, 10.73, (vec![0.5], vec![(1.0, 0.0)])),
        row("DAD", 3, 2, 2, 0.0833, 3.00, (vec![1.0], vec![(0.5, -1.0 / 48.0)])),
        row("ADA", 4, 2, 2, 0.0417, 6.00, (vec![0.5], vec![(1.0, 1.0 / 12.0)])),
        // five stages
        row("BABAB", 5, 2, 2, 0.00855, 29.24, v5(lam, 0.0, 0.0)),
        row("ABABA", 6, 2, 2, 0.00855, 29.24, p5(lam, 0.0)),
        row("DABAD", 7, 4, 3, 0.00335, 3.68, v5(1.0 / 6.0, 1.0 / 144.0, 0.0)),
        row("BADAB", 8, 4, 3, 0.000728, 16.96, v5(1.0 / 6.0, 0.0, 1.0 / 72.0)),
        row(
            "DADAD",
            9,
            4,
            4,
            0.000625,
            6.25,
            v5(1.0 / 6.0, -0.000881991367333, 0.015652871623554),
        ),
        row(
            "ADADA",
            10,
            4,
            4,
            0.000718,
            5.44,
            p5((1.0 - 1.0 / s3) / 2.0, (2.0 - s3) / 48.0),
        ),
        // seven stages
        row("BABABAB", 11, 4, 3, 0.0383, 0.32, v7(x, x / 2.0, 0.0, 0.0)),
        row("ABABABA", 12, 4, 3, 0.0283, 0.44, p7(x / 2.0, x, 0.0, 0.0)),
        row(
            "DABABAD",
            13,
            4,
            4,
            0.000891,
            4.38,
            v7(0.258529167713908, 0.065274481323251, 0.003595899064589, 0.0),
        ),
        row(
            "ABADABA",
            14,
            4,
            4,
            0.000149,
            26.19,
            p7(0.089775972994422, 0.247597680043986, 0.0, 0.006911440413815),
        ),
        row(
            "BADADAB",
            15,
            4,
            5,
            0.0000498,
            32.12,
            v7(0.281473422092232, 0.087960811032557, 0.0, 0.003060423791562),
        ),
        row(
            "ADABADA",
            16,
            4,
            5,
            0.0000844,
            18.95,
            p7(0.136458051118946, 0.315267858070664, 0.002427032834125, 0.0),
        ),
        row(
            "DADADAD",
            17,
            4,
            6,
            0.0000275,
            28.09,
            v7(
                0.273005515864808,
                0.080128674198082,
                0.000271601364672,
                0.002959399979707,
            ),
        ),
        row(
            "ADADADA",
            18,
            4,
            6,
            0.0000200,
            38.57,
            p7(
                0.116438749543126,
                0.283216992495952,
                0.001247201195115,
                0.002974030329635,
            ),
        ),
        // nine stages
        row(
            "BABABABAB",
            19,
            4,
            4,
            0.000654,
            5.97,
            v9(0.520943339103990, 0.164498651557576, 1.235692651138917, 0.0, 0.0, 0.0),
        ),
        row(
            "ABABABABA",
            20,
            4,
            4,
            0.000610,
            6.40,
            p9(0.178617895844809, -0.066264582669818, 0.712341831062606, 0.0, 0.0),
        ),
        row(
            "BABADABAB",
            21,
            4,
            5,
            0.0000651,
            24.57,
            v9(
                0.200395293638238,
                0.073943321445602,
                0.258244950046509,
                0.0,
                0.0,
                0.003147048491590,
            ),
        ),
        row(
            "DABABABAD",
            22,
            4,
            5,
            0.000336,
            4.76,
            v9(
                0.190585159174513,
                0.036356798097337,
                0.340278911234329,
                0.002005691094612,
                0.0,
                0.0,
            ),
        ),
        row(
            "DABADABAD",
            23,
            4,
            6,
            0.0000130,
            59.33,
            v9(
                0.197279141794602,
                0.060885008530668,
                0.288579639891554,
                0.000429756946246,
                0.0,
                0.002373498029145,
            ),
        ),
        row(
            "BADABADAB",
            24,
            4,
            6,
            0.0000105,
            73.45,
            v9(
                0.219039425103133,
                0.068466565514186,
                0.311000565033563,
                0.0,
                0.001602470431500,
                0.0,
            ),
        ),
        row(
            "ABADADABA",
            25,
            4,
            6,
            0.0000346,
            22.32,
            p9(
                0.047802682977081,
                0.265994592108478,
                0.143282503449494,
                0.0,
                0.002065558490728,
            ),
        ),
        row(
            "ADABABADA",
            26,
            4,
            6,
            0.0000471,
            16.39,
            p9(
                0.118030603246046,
                0.295446189611111,
                0.273985556386628,
                0.001466561305710,
                0.0,
            ),
        ),
        row(
            "DADABADAD",
            27,
            4,
            7,
            0.0000101,
            41.06,
            v9(
                0.227758000273404,
                0.070935378258660,
                0.322911610232109,
                0.000067752132787,
                0.001597508440746,
                0.0,
            ),
        ),
        row(
            "BADADADAB",
            28,
            6,
            7,
            0.00154,
            0.0055,
            v9(
                a6,
                a6 / 3.0,
                -5.0 * a6 * (a6 - 1.0) / 3.0,
                0.0,
                -5.0 * a6 * a6 / 144.0 + a6 / 36.0 - 1.0 / 288.0,
                1.0 / 144.0 - (a6 / 36.0) * (a6 / 2.0 + 1.0),
            ),
        ),
        row(
            "ADADADADA",
            29,
            4,
            8,
            0.00000501,
            48.71,
            p9(
                0.094471605659163,
                0.281057227947299,
                0.227712700174579,
                0.000577062053569,
                0.000817399268485,
            ),
        ),
        // eleven stages
        row(
            "BABABABABAB",
            30,
            4,
            5,
            0.0000270,
            59.26,
            v11(
                0.253978510841060,
                -0.032302867652700,
                0.083983152628767,
                0.682236533571909,
                0.0,
                0.0,
                0.0,
            ),
        ),
        row(
            "ABABABABABA",
            31,
            4,
            5,
            0.0000518,
            30.89,
            p11(
                0.275008121233242,
                -0.134795009910679,
                -0.084429619507071,
                0.354900057157426,
                0.0,
                0.0,
                0.0,
            ),
        ),
        row(
            "DABABABABAD",
            32,
            4,
            6,
            0.0000166,
            46.47,
            v11(
                0.282918304065611,
                -0.002348009438292,
                0.080181913812571,
                -1.372969015964262,
                0.000325098077953,
                0.0,
                0.0,
            ),
        ),
        row(
            "ABABADABABA",
            33,
            4,
            6,
            0.0000154,
            50.09,
            p11(
                0.134257092137626,
                -0.007010267216916,
                -0.485681409840328,
                0.767464037573892,
                0.0,
                0.0,
                0.002836723107629,
            ),
        ),
        row(
            "BADABABADAB",
            34,
            4,
            7,
            0.00000520,
            80.13,
            v11(
                0.201110227930330,
                0.200577842713366,
                0.065692416344302,
                0.264163604920340,
                0.0,
                0.001036943019757,
                0.0,
            ),
        ),
        row(
            "BABADADABAB",
            35,
            4,
            7,
            0.0000189,
            21.98,
            v11(
                0.122268182901557,
                0.203023211433263,
                0.055200549768959,
                0.127408150658963,
                0.0,
                0.0,
                0.001487834491987,
            ),
        ),
        row(
            "ABADABADABA",
            36,
            4,
            7,
            0.00000445,
            93.60,
            p11(
                0.062702644098210,
                0.193174566017780,
                0.149293739165427,
                0.220105234408407,
                0.0,
                0.000966194415594,
                0.0,
            ),
        ),
        row(
            "ADABABABADA",
            37,
            4,
            7,
            0.0000128,
            32.64,
            p11(
                0.115889910143319,
                0.388722377182381,
                0.282498420841510,
                -0.625616553474143,
                0.001208219887746,
                0.0,
                0.0,
            ),
        ),
        row(
            "DABADADABAD",
            38,
            4,
            8,
            0.00000355,
            68.84,
            v11(
                0.068597474282941,
                0.284851197274498,
                -0.029456704762871,
                0.228751459942521,
                0.000410146066173,
                0.0,
                0.001249935251564,
            ),
        ),
        row(
            "DADABABADAD",
            39,
            4,
            8,
            0.00000519,
            47.08,
            v11(
                0.203263079324187,
                0.200698071607808,
                0.066202529912271,
                0.267856111220228,
                0.000012570620797,
                0.001042408779514,
                0.0,
            ),
        ),
        row(
            "ADABADABADA",
            40,
            4,
            8,
            0.00000318,
            76.79,
            p11(
                0.083684971641549,
                0.225966488946428,
                0.199022868372193,
                0.197953981691206,
                0.000437056543403,
                0.0,
                0.000870457820984,
            ),
        ),
        row(
            "BADADADADAB",
            42,
            6,
            9,
            0.00000699,
            0.27,
            v11(
                0.270990466773838,
                0.635374358266882,
                0.090330155591279,
                0.430978044876253,
                0.0,
                0.002637435980472,
                -0.000586445610932,
            ),
        ),
        row(
            "ADADABADADA",
            43,
            4,
            9,
            0.00000235,
            64.99,
            p11(
                0.082541033171754,
                0.228637847036999,
                0.196785139280847,
                0.206783248777282,
                0.000317260402502,
                0.000555360763892,
                0.0,
            ),
        ),
        row(
            "ADADADADADA",
            45,
            6,
            10,
            0.00000603,
            0.17,
            p11(
                0.109534125980058,
                0.426279051773841,
                0.268835839917653,
                0.529390037396794,
                0.000806354602850,
                0.007662601517364,
                -0.011627206142396,
            ),
        ),
    ]
}

fn r(n: i64, d: i64) -> Ratio<i64> {
    Ratio::new(n, d)
}

/// Exact stage lists for the rows whose coefficients are rational.
fn exact_stages(name: &str) -> Option<Vec<ExactStage>> {
    use ExactStage::{Drift as A, Kick as K};
    let z = r(0, 1);
    let half: Vec<ExactStage> = match name {
        "BAB" => vec![K(r(1, 2), z), A(r(1, 1))],
        "ABA" => vec![A(r(1, 2)), K(r(1, 1), z)],
        "DAD" => vec![K(r(1, 2), r(-1, 48)), A(r(1, 1))],
        "ADA" => vec![A(r(1, 2)), K(r(1, 1), r(1, 12))],
        "BADAB" => vec![K(r(1, 6), z), A(r(1, 2)), K(r(2, 3), r(1, 72))],
        "DABAD" => vec![K(r(1, 6), r(1, 144)), A(r(1, 2)), K(r(2, 3), z)],
        _ => return None,
    };
    let n = half.len();
    let mut full = half.clone();
    full.extend(half[..n - 1].iter().rev());
    Some(full)
}

static CATALOG: OnceLock<Vec<Scheme>> = OnceLock::new();

/// Every tabulated scheme, in table order.
pub fn catalog() -> &'static [Scheme] {
    CATALOG.get_or_init(|| {
        rows()
            .iter()
            .map(|row| {
                let mut s = row.build().expect("catalog row must validate");
                s.exact = exact_stages(row.name);
                s
            })
            .collect()
    })
}

pub fn lookup(name: &str) -> Result<&'static Scheme> {
    catalog()
        .iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownScheme(name.to_string()))
}

/// Resolves `all`, `gradient`, `nongradient`, or a comma-separated list of
/// names.
pub fn select(spec: &str) -> Result<Vec<&'static Scheme>> {
    match spec.trim() {
        "all" => Ok(catalog().iter().collect()),
        "gradient" => Ok(catalog().iter().filter(|s| s.is_gradient()).collect()),
        "nongradient" => Ok(catalog().iter().filter(|s| !s.is_gradient()).collect()),
        list => list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(lookup)
            .collect(),
    }
}

/// Flat export record.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogRecord {
    pub name: String,
    pub letters: String,
    pub version: Version,
    pub p: u32,
    pub n_f: usize,
    pub err: f64,
    pub eff: f64,
    pub id: u32,
    /// Stage coefficients `a`, `b`, or `b:c`, separated by spaces.
    pub coefficients: String,
}

impl From<&Scheme> for CatalogRecord {
    fn from(s: &Scheme) -> Self {
        let table = s.table.unwrap_or(TableRow {
            id: 0,
            n_f: crate::scheme::count_forces(s),
            err: f64::NAN,
            eff: f64::NAN,
        });
        let coefficients = s
            .stages
            .iter()
            .map(|st| match st {
                Stage::Drift { a } => format!("{a:.17e}"),
                Stage::Kick { b } => format!("{b:.17e}"),
                Stage::FgKick { b, c } => format!("{b:.17e}:{c:.17e}"),
            })
            .collect::<Vec<_>>()
            .join(" ");
        CatalogRecord {
            name: s.name.clone(),
            letters: s.letters(),
            version: s.version,
            p: s.order.unwrap_or(0),
            n_f: table.n_f,
            err: table.err,
            eff: table.eff,
            id: table.id,
            coefficients,
        }
    }
}

pub fn write_csv<W: Write>(schemes: &[&Scheme], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in schemes {
        w.serialize(CatalogRecord::from(*s))?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json(schemes: &[&Scheme]) -> Result<String> {
    let recs: Vec<CatalogRecord> = schemes.iter().map(|s| CatalogRecord::from(*s)).collect();
    Ok(serde_json::to_string_pretty(&recs)?)
}

/// SHA-256 of the CSV export of the full catalog, hex encoded.
pub fn catalog_checksum() -> String {
    let all: Vec<&Scheme> = catalog().iter().collect();
    let mut buf = Vec::new();
    write_csv(&all, &mut buf).expect("in-memory write");
    Sha256::digest(&buf)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
