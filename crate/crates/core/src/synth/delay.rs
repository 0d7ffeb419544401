use serde::{Deserialize, Serialize};

pub const MAX_DELAY_S: f64 = 2.0;
pub const MAX_FEEDBACK: f64 = 0.95;

/// One parameter set shared by every enabled delay unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DelayParams {
    pub time_s: f64,
    pub feedback: f64,
    /// One-pole low-pass cutoff in the feedback path; `None` bypasses it.
    pub lpf_cutoff_hz: Option<f64>,
    pub mix: f64,
    /// Per sample group: brow, eye, cheek, mouth.
    pub enabled: [bool; 4],
}

impl Default for DelayParams {
    fn default() -> Self {
        Self { time_s: 0.5, feedback: 0.4, lpf_cutoff_hz: Some(2000.0), mix: 0.5, enabled: [false; 4] }
    }
}

impl DelayParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=MAX_DELAY_S).contains(&self.time_s) {
            return Err(format!("delay time {} s not in [0, {MAX_DELAY_S}]", self.time_s));
        }
        if !(0.0..=MAX_FEEDBACK).contains(&self.feedback) {
            return Err(format!("feedback {} not in [0, {MAX_FEEDBACK}]", self.feedback));
        }
        if !(0.0..=1.0).contains(&self.mix) {
            return Err(format!("mix {} not in [0, 1]", self.mix));
        }
        if let Some(fc) = self.lpf_cutoff_hz {
            if !(fc.is_finite() && fc > 0.0) {
                return Err(format!("lpf cutoff {fc} must be > 0"));
            }
        }
        Ok(())
    }

    /// Delay length in samples (at least one).
    pub fn length_samples(&self, rate: u32) -> usize {
        ((self.time_s * f64::from(rate)).round() as usize).max(1)
    }

    /// One-pole coefficient `exp(-2 pi fc / rate)`; zero when bypassed.
    pub fn lpf_coefficient(&self, rate: u32) -> f64 {
        self.lpf_cutoff_hz.map_or(0.0, |fc| (-2.0 * std::f64::consts::PI * fc / f64::from(rate)).exp())
    }
}

/// Stereo feedback delay:
/// `w[n] = x[n] + fb * lpf(w[n - D])`, `y[n] = x[n] + mix * fb * lpf(w[n - D])`.
#[derive(Clone, Debug)]
pub struct DelayLine {
    buf: [Vec<f64>; 2],
    pos: usize,
    length: usize,
    feedback: f64,
    mix: f64,
    coeff: f64,
    lp_state: [f64; 2],
}

impl DelayLine {
    pub fn new(rate: u32) -> Self {
        let cap = (MAX_DELAY_S * f64::from(rate)).round() as usize + 1;
        Self { buf: [vec![0.0; cap], vec![0.0; cap]], pos: 0, length: 1, feedback: 0.0, mix: 0.0, coeff: 0.0, lp_state: [0.0; 2] }
    }

    pub fn configure(&mut self, p: &DelayParams, rate: u32) {
        self.length = p.length_samples(rate).min(self.buf[0].len() - 1).max(1);
        self.feedback = p.feedback;
        self.mix = p.mix;
        self.coeff = p.lpf_coefficient(rate);
    }

    pub fn reset(&mut self) {
        for b in &mut self.buf {
            b.fill(0.0);
        }
        self.lp_state = [0.0; 2];
    }

    #[inline]
    pub fn process(&mut self, input: [f64; 2]) -> [f64; 2] {
        let cap = self.buf[0].len();
        let read = (self.pos + cap - self.length) % cap;
        let mut out = [0.0; 2];
        for ch in 0..2 {
            let delayed = self.buf[ch][read];
            let lp = (1.0 - self.coeff) * delayed + self.coeff * self.lp_state[ch];
            self.lp_state[ch] = lp;
            let wet = self.feedback * lp;
            self.buf[ch][self.pos] = input[ch] + wet;
            out[ch] = input[ch] + self.mix * wet;
        }
        self.pos = (self.pos + 1) % cap;
        out
    }
}
