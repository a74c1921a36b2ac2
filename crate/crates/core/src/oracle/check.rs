//! Snapshot checker: every rtx read must equal the last logged append to
//! that cell with a stamp at or below the rtx timestamp.

use crate::oracle::shadow::{History, RtxRecord, ShadowLog};
use crate::ts::Timestamp;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub cell: u64,
    pub t: Timestamp,
    pub expected: Option<u64>,
    pub got: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CheckReport {
    pub rtxs: usize,
    pub reads: usize,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verdict for one rtx: the first violating read, if any.
pub fn check_rtx(history: &History, rtx: &RtxRecord) -> Result<(), Violation> {
    for &(cell, got) in &rtx.reads {
        let expected = history.value_at(cell, rtx.t);
        if expected != Some(got) {
            return Err(Violation { cell, t: rtx.t, expected, got });
        }
    }
    Ok(())
}

pub fn check_log(log: &ShadowLog) -> CheckReport {
    let history = log.histories();
    let mut report = CheckReport::default();
    for rtx in log.rtx_records() {
        report.rtxs += 1;
        report.reads += rtx.reads.len();
        if let Err(v) = check_rtx(&history, &rtx) {
            report.violations.push(v);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::shadow::AppendRecord;

    fn log() -> ShadowLog {
        let log = ShadowLog::new(1);
        for (seq, ts, fp) in [(0, i64::MIN, 0), (1, 1, 10), (2, 3, 11), (3, 7, 12)] {
            log.append(0, AppendRecord { cell: 1, seq, ts: Timestamp(ts), fp });
        }
        log
    }

    #[test]
    fn reads_checked_against_floor() {
        let h = log().histories();
        let rtx = |t, fp| RtxRecord { t: Timestamp(t), reads: vec![(1, fp)] };
        assert!(check_rtx(&h, &rtx(5, 11)).is_ok());
        assert!(check_rtx(&h, &rtx(7, 12)).is_ok());
        assert!(check_rtx(&h, &rtx(0, 0)).is_ok());
        let v = check_rtx(&h, &rtx(5, 12)).unwrap_err();
        assert_eq!(v.expected, Some(11));
    }

    #[test]
    fn injected_wrong_read_is_caught() {
        let log = log();
        log.rtx(0, RtxRecord { t: Timestamp(8), reads: vec![(1, 12)] });
        log.rtx(0, RtxRecord { t: Timestamp(2), reads: vec![(1, 11)] });
        let r = check_log(&log);
        assert_eq!(r.rtxs, 2);
        assert_eq!(r.violations.len(), 1);
    }
}
