//! Reference variance tables (n = 10000) and the comparison against
//! printed digits, shared by the table tests and the acceptance run.

#![allow(dead_code)]

/// `(ratio, eps_inf, [L-GRR k=2, k=32, k=1024, L-OSUE, L-SUE, L-SOUE, L-OUE])`.
pub const LONGITUDINAL: [(f64, f64, [&str; 7]); 24] = [
    (
        0.6,
        0.5,
        [
            "0.001103", "0.980969", "26706", "0.004411", "0.004436", "0.005306", "0.005549",
        ],
    ),
    (
        0.6,
        1.0,
        [
            "0.000270", "0.125036", "3153", "0.001078", "0.001103", "0.001234", "0.001347",
        ],
    ),
    (
        0.6,
        2.0,
        [
            "0.000062", "0.006327", "117", "0.000247", "0.000270", "0.000264", "0.000310",
        ],
    ),
    (
        0.6,
        4.0,
        [
            "0.000011", "0.000078", "0.25903", "0.000044", "0.000062", "0.000045", "0.000057",
        ],
    ),
    (
        0.5,
        0.5,
        [
            "0.001592", "2.088372", "60218", "0.006367", "0.006392", "0.007336", "0.007611",
        ],
    ),
    (
        0.5,
        1.0,
        [
            "0.000392", "0.268074", "7198", "0.001567", "0.001592", "0.001740", "0.001872",
        ],
    ),
    (
        0.5,
        2.0,
        [
            "0.000092", "0.013926", "281", "0.000368", "0.000392", "0.000389", "0.000447",
        ],
    ),
    (
        0.5,
        4.0,
        [
            "0.000018", "0.000188", "0.74088", "0.000072", "0.000092", "0.000073", "0.000092",
        ],
    ),
    (
        0.4,
        0.5,
        [
            "0.002492", "4.530779", "135874", "0.009967", "0.009992", "0.011012", "0.011324",
        ],
    ),
    (
        0.4,
        1.0,
        [
            "0.000617", "0.586823", "16443", "0.002467", "0.002492", "0.002658", "0.002812",
        ],
    ),
    (
        0.4,
        2.0,
        [
            "0.000148", "0.031552", "673", "0.000593", "0.000617", "0.000617", "0.000690",
        ],
    ),
    (
        0.4,
        4.0,
        [
            "0.000032", "0.000484", "2.12772", "0.000127", "0.000148", "0.000128", "0.000156",
        ],
    ),
    (
        0.3,
        0.5,
        [
            "0.004436", "10", "329836", "0.017744", "0.017769", "0.018863", "0.019214",
        ],
    ),
    (
        0.3,
        1.0,
        [
            "0.001103", "1.398568", "40412", "0.004411", "0.004436", "0.004620", "0.004799",
        ],
    ),
    (
        0.3,
        2.0,
        [
            "0.000270", "0.078202", "1737", "0.001078", "0.001103", "0.001106", "0.001198",
        ],
    ),
    (
        0.3,
        4.0,
        [
            "0.000062", "0.001389", "6", "0.000247", "0.000270", "0.000248", "0.000291",
        ],
    ),
    (
        0.2,
        0.5,
        [
            "0.009992", "30", "972656", "0.039967", "0.039992", "0.041148", "0.041536",
        ],
    ),
    (
        0.2,
        1.0,
        [
            "0.002492", "4.080052", "120651", "0.009967", "0.009992", "0.010190", "0.010394",
        ],
    ),
    (
        0.2,
        2.0,
        [
            "0.000617", "0.237925", "5443", "0.002467", "0.002492", "0.002498", "0.002610",
        ],
    ),
    (
        0.2,
        4.0,
        [
            "0.000148", "0.004939", "24", "0.000593", "0.000617", "0.000595", "0.000659",
        ],
    ),
    (
        0.1,
        0.5,
        [
            "0.039992", "154", "4941829", "0.159967", "0.159992", "0.161191", "0.161608",
        ],
    ),
    (
        0.1,
        1.0,
        [
            "0.009992", "20", "620584", "0.039967", "0.039992", "0.040201", "0.040424",
        ],
    ),
    (
        0.1,
        2.0,
        [
            "0.002492", "1.255550", "29356", "0.009967", "0.009992", "0.010000", "0.010130",
        ],
    ),
    (
        0.1,
        4.0,
        [
            "0.000617", "0.030494", "156", "0.002467", "0.002492", "0.002469", "0.002560",
        ],
    ),
];

/// `(eps, [GRR k=2, k=32, k=1024, OUE, SUE])`.
pub const SINGLE_ROUND: [(f64, [&str; 5]); 4] = [
    (
        0.5,
        ["0.000392", "0.007520", "0.243240", "0.001567", "0.001592"],
    ),
    (
        1.0,
        ["0.000092", "0.001108", "0.034707", "0.000368", "0.000392"],
    ),
    (
        2.0,
        ["0.000018", "0.000092", "0.002522", "0.000072", "0.000092"],
    ),
    (
        4.0,
        ["0.000002", "0.000003", "0.000037", "0.000008", "0.000018"],
    ),
];

pub const KS: [usize; 3] = [2, 32, 1024];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DigitMatch {
    Rounded,
    Truncated,
    Mismatch,
}

/// Compares `value` with a printed cell at the cell's own number of
/// decimals, accepting either rounding or truncation of the trailing digits.
pub fn match_printed(printed: &str, value: f64) -> DigitMatch {
    let decimals = printed.split_once('.').map_or(0, |(_, frac)| frac.len());
    let digits: i64 = printed.replace('.', "").parse().expect("numeric cell");
    let scaled = value * 10f64.powi(decimals as i32);
    if scaled.round() as i64 == digits {
        DigitMatch::Rounded
    } else if scaled.trunc() as i64 == digits {
        DigitMatch::Truncated
    } else {
        DigitMatch::Mismatch
    }
}
