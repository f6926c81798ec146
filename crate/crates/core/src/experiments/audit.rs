use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::learn::{FitProbe, FitStage};

/// Collects every case where a fitting step saw a held-out test row.
#[derive(Debug, Default)]
pub struct LeakageAudit {
    checks: AtomicUsize,
    violations: Mutex<Vec<String>>,
}

impl LeakageAudit {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of fitting steps inspected.
    pub fn checks(&self) -> usize {
        self.checks.load(Ordering::Relaxed)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = self.violations.lock().expect("audit lock").clone();
        v.sort();
        v
    }

    pub(crate) fn cell<'a>(&'a self, cell: String, test_ids: HashSet<String>) -> CellProbe<'a> {
        CellProbe {
            audit: self,
            cell,
            test_ids,
        }
    }
}

pub(crate) struct CellProbe<'a> {
    audit: &'a LeakageAudit,
    cell: String,
    test_ids: HashSet<String>,
}

impl FitProbe for CellProbe<'_> {
    fn record(&self, stage: FitStage, session_ids: &[String]) {
        self.audit.checks.fetch_add(1, Ordering::Relaxed);
        let leaked: Vec<&String> = session_ids.iter().filter(|s| self.test_ids.contains(*s)).collect();
        if !leaked.is_empty() {
            self.audit.violations.lock().expect("audit lock").push(format!(
                "{}: {stage:?} used {} test row(s), e.g. {}",
                self.cell,
                leaked.len(),
                leaked[0]
            ));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_test_rows() {
        let audit = LeakageAudit::new();
        let probe = audit.cell("c".into(), ["t1".to_string()].into_iter().collect());
        probe.record(FitStage::Scaler, &["a".into(), "b".into()]);
        assert!(audit.violations().is_empty());
        probe.record(FitStage::Selection, &["a".into(), "t1".into()]);
        assert_eq!(audit.violations().len(), 1);
        assert_eq!(audit.checks(), 2);
    }
}
