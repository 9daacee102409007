/// Tracks classified migration throughput on one controlled access link.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationMonitor {
    pub capacity: f64,
    pub floor: f64,
    pub ticks: u64,
    pub max_controlled: f64,
    pub max_uncontrolled: f64,
    pub violations: u64,
}

impl IsolationMonitor {
    pub fn new(capacity: f64, floor: f64) -> Self {
        Self { capacity, floor, ticks: 0, max_controlled: 0.0, max_uncontrolled: 0.0, violations: 0 }
    }

    /// Highest migration rate the link may carry.
    pub fn limit(&self) -> f64 {
        self.capacity - self.floor
    }

    /// Records one tick. Only controlled traffic counts towards violations;
    /// migration from sources without enforcement is reported separately.
    pub fn record(&mut self, controlled: f64, uncontrolled: f64) -> bool {
        self.ticks += 1;
        self.max_controlled = self.max_controlled.max(controlled);
        self.max_uncontrolled = self.max_uncontrolled.max(uncontrolled);
        let limit = self.limit();
        let ok = controlled <= limit + 1e-9 * limit.abs().max(1.0);
        if !ok {
            self.violations += 1;
        }
        ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records() {
        let mut m = IsolationMonitor::new(10.0, 3.0);
        assert!(m.record(0.0, 0.0));
        assert!(m.record(7.0, 2.0));
        assert!(!m.record(7.5, 0.0));
        assert_eq!((m.ticks, m.violations, m.max_uncontrolled), (3, 1, 2.0));
    }
}
