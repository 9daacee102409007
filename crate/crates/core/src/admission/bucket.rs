/// Enforcement period; default bucket depth is two of these at full rate.
pub const ENFORCEMENT_QUANTUM_S: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Forward,
    Drop,
}

/// Per-flow rate limiter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenBucket {
    pub rate: f64,
    tokens: f64,
    last_refill: f64,
    pub capacity: f64,
}

impl TokenBucket {
    /// Full bucket with the default depth.
    pub fn new(rate: f64, now: f64) -> Self {
        Self::with_capacity(rate, 2.0 * rate * ENFORCEMENT_QUANTUM_S, now)
    }

    pub fn with_capacity(rate: f64, capacity: f64, now: f64) -> Self {
        Self { rate, tokens: capacity, last_refill: now, capacity }
    }

    pub fn empty(rate: f64, capacity: f64, now: f64) -> Self {
        Self { rate, tokens: 0.0, last_refill: now, capacity }
    }

    pub fn tokens(&self) -> f64 {
        self.tokens
    }

    fn refill(&mut self, now: f64) {
        debug_assert!(now >= self.last_refill, "bucket time went backwards");
        let dt = (now - self.last_refill).max(0.0);
        self.tokens = (self.tokens + self.rate * dt).min(self.capacity);
        self.last_refill = now;
    }

    /// Packet-level decision: forward iff enough tokens for the whole packet.
    pub fn forward(&mut self, pkt_bytes: f64, now: f64) -> Verdict {
        self.refill(now);
        if self.tokens >= pkt_bytes {
            self.tokens -= pkt_bytes;
            Verdict::Forward
        } else {
            Verdict::Drop
        }
    }

    /// Fluid variant: sends as much of `bytes` as tokens allow and returns
    /// the amount sent.
    pub fn take_up_to(&mut self, bytes: f64, now: f64) -> f64 {
        self.refill(now);
        let sent = bytes.min(self.tokens).max(0.0);
        self.tokens -= sent;
        sent
    }

    pub fn set_rate(&mut self, rate: f64, now: f64) {
        self.refill(now);
        self.rate = rate;
        self.capacity = 2.0 * rate * ENFORCEMENT_QUANTUM_S;
        self.tokens = self.tokens.min(self.capacity);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_threshold() {
        let mut b = TokenBucket::empty(100.0, 1000.0, 0.0);
        assert_eq!(b.forward(100.0, 1.0), Verdict::Forward);
        let mut b = TokenBucket::empty(100.0, 1000.0, 0.0);
        assert_eq!(b.forward(101.0, 1.0), Verdict::Drop);
        assert_eq!(b.tokens(), 100.0);
    }

    #[test]
    fn never_exceeds_capacity() {
        let mut b = TokenBucket::new(1000.0, 0.0);
        assert_eq!(b.capacity, 200.0);
        b.forward(0.0, 100.0);
        assert_eq!(b.tokens(), 200.0);
    }

    #[test]
    fn fluid_limit_at_double_load() {
        let rate = 1.25e6;
        let pkt = 1500.0;
        let mut b = TokenBucket::new(rate, 0.0);
        let gap = pkt / (2.0 * rate);
        let horizon = 60.0;
        let n = (horizon / gap) as usize;
        let mut sent = 0.0;
        for k in 1..=n {
            if b.forward(pkt, k as f64 * gap) == Verdict::Forward {
                sent += pkt;
            }
        }
        let thr = sent / horizon;
        assert!((thr / rate - 1.0).abs() < 0.02, "throughput {thr}");
    }
}
