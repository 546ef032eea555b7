//! Time-dependent Rabi-frequency and detuning waveforms.
//!
//! All quantities are internal units: angular frequencies in rad/µs and times
//! in µs. Waveforms are plain values; every evaluation is a pure function of
//! time.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

/// Envelope level, relative to the peak, below which a pulse is considered
/// switched off when computing its support window.
pub const ENVELOPE_CUTOFF: f64 = 1e-8;

/// Errors raised when constructing a waveform with inconsistent parameters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PulseError {
    #[error("pulse width must be positive, got {0}")]
    NonPositiveWidth(f64),
    #[error("time window must satisfy start < end, got [{start}, {end}]")]
    InvalidWindow { start: f64, end: f64 },
    #[error("Stokes and pump centers coincide at {0} µs")]
    CoincidentCenters(f64),
    #[error("nonlinear detuning needs at least one sweep center")]
    NoCenters,
    #[error("sweep centers must be strictly increasing")]
    UnorderedCenters,
    #[error("odd power must be 3 or 5, got {0}")]
    UnsupportedPower(u32),
    #[error("hypergaussian order must be at least 1")]
    ZeroOrder,
    #[error("parameter `{name}` must be finite and positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
}

/// A closed time interval in µs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self, PulseError> {
        if start.is_finite() && end.is_finite() && start < end {
            Ok(Self { start, end })
        } else {
            Err(PulseError::InvalidWindow { start, end })
        }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }

    pub fn union(&self, other: &Window) -> Window {
        Window {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }

    pub fn shifted(&self, dt: f64) -> Window {
        Window {
            start: self.start + dt,
            end: self.end + dt,
        }
    }

    /// Reflection `t -> 2*about - t`.
    pub fn mirrored(&self, about: f64) -> Window {
        Window {
            start: 2.0 * about - self.end,
            end: 2.0 * about - self.start,
        }
    }
}

/// Sign of the laser field amplitude; flipping it inverts the Rabi frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FieldSign {
    #[default]
    Positive,
    Negative,
}

impl FieldSign {
    pub fn factor(self) -> f64 {
        match self {
            FieldSign::Positive => 1.0,
            FieldSign::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            FieldSign::Positive => FieldSign::Negative,
            FieldSign::Negative => FieldSign::Positive,
        }
    }
}

/// How the intermediate-state detuning of a STIRAP pair depends on time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetuningRule {
    /// The same detuning throughout.
    #[default]
    Constant,
    /// `δ·sgn(t)` with `sgn(0) = +1`.
    SignOfTime,
}

/// `sgn` with the convention `sgn(0) = +1`.
pub fn sign_of_time(t: f64) -> f64 {
    if t < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Time a Gaussian `exp(-x²/2w²)` needs to decay to `threshold`.
fn gaussian_half_width(width: f64, threshold: f64) -> f64 {
    width * (2.0 * (1.0 / threshold).ln()).sqrt()
}

fn gaussian(t: f64, center: f64, width: f64) -> f64 {
    let x = (t - center) / width;
    (-0.5 * x * x).exp()
}

fn require_positive(name: &'static str, value: f64) -> Result<(), PulseError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(PulseError::NotPositive { name, value })
    }
}

/// A single-field drive of a two-level transition.
pub trait TwoLevelDrive {
    /// Signed Rabi frequency.
    fn rabi(&self, t: f64) -> f64;
    /// Detuning from resonance.
    fn detuning(&self, t: f64) -> f64;
    /// Time derivative of [`TwoLevelDrive::rabi`].
    fn rabi_rate(&self, t: f64) -> f64;
    /// Time derivative of [`TwoLevelDrive::detuning`], one-sided at jumps.
    fn detuning_rate(&self, t: f64) -> f64;
    /// Interval outside which the envelope is below [`ENVELOPE_CUTOFF`].
    fn support(&self) -> Window;
    /// Times at which the waveform is discontinuous.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// A pump/Stokes field pair driving the ladder g-e-r.
pub trait ThreeLevelDrive {
    fn pump(&self, t: f64) -> f64;
    fn stokes(&self, t: f64) -> f64;
    /// Detuning of the intermediate level.
    fn detuning(&self, t: f64) -> f64;
    fn support(&self) -> Window;
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Gaussian envelope with a linear frequency chirp through resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianChirpPulse {
    pub peak_rabi: f64,
    pub width: f64,
    pub center: f64,
    pub chirp_rate: f64,
    pub field_sign: FieldSign,
}

impl GaussianChirpPulse {
    pub fn new(peak_rabi: f64, width: f64, center: f64, chirp_rate: f64) -> Result<Self, PulseError> {
        if !(width.is_finite() && width > 0.0) {
            return Err(PulseError::NonPositiveWidth(width));
        }
        Ok(Self {
            peak_rabi,
            width,
            center,
            chirp_rate,
            field_sign: FieldSign::Positive,
        })
    }

    pub fn with_field_sign(mut self, sign: FieldSign) -> Self {
        self.field_sign = sign;
        self
    }

    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            center: self.center + dt,
            ..*self
        }
    }

    pub fn support_with(&self, threshold: f64) -> Window {
        let half = gaussian_half_width(self.width, threshold);
        Window {
            start: self.center - half,
            end: self.center + half,
        }
    }
}

impl TwoLevelDrive for GaussianChirpPulse {
    fn rabi(&self, t: f64) -> f64 {
        self.field_sign.factor() * self.peak_rabi * gaussian(t, self.center, self.width)
    }

    fn detuning(&self, t: f64) -> f64 {
        self.chirp_rate * (t - self.center)
    }

    fn rabi_rate(&self, t: f64) -> f64 {
        -(t - self.center) / (self.width * self.width) * self.rabi(t)
    }

    fn detuning_rate(&self, _t: f64) -> f64 {
        self.chirp_rate
    }

    fn support(&self) -> Window {
        self.support_with(ENVELOPE_CUTOFF)
    }
}

/// Rectangular pulse of constant Rabi frequency and detuning on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquarePulse {
    pub rabi: f64,
    pub detuning: f64,
    pub window: Window,
}

impl SquarePulse {
    pub fn new(rabi: f64, detuning: f64, window: Window) -> Self {
        Self { rabi, detuning, window }
    }

    /// Resonant pulse of the given area, starting at `start`.
    pub fn with_area(rabi: f64, area: f64, start: f64) -> Result<Self, PulseError> {
        require_positive("rabi", rabi.abs())?;
        require_positive("area", area)?;
        Ok(Self {
            rabi,
            detuning: 0.0,
            window: Window::new(start, start + area / rabi.abs())?,
        })
    }
}

impl TwoLevelDrive for SquarePulse {
    fn rabi(&self, t: f64) -> f64 {
        if t >= self.window.start && t < self.window.end {
            self.rabi
        } else {
            0.0
        }
    }

    fn detuning(&self, _t: f64) -> f64 {
        self.detuning
    }

    fn rabi_rate(&self, _t: f64) -> f64 {
        0.0
    }

    fn detuning_rate(&self, _t: f64) -> f64 {
        0.0
    }

    fn support(&self) -> Window {
        self.window
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.window.start, self.window.end]
    }
}

/// Odd exponent of the fast term of a nonlinear sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OddPower {
    Cubic,
    Quintic,
}

impl OddPower {
    pub fn from_exponent(p: u32) -> Result<Self, PulseError> {
        match p {
            3 => Ok(OddPower::Cubic),
            5 => Ok(OddPower::Quintic),
            other => Err(PulseError::UnsupportedPower(other)),
        }
    }

    pub fn exponent(self) -> i32 {
        match self {
            OddPower::Cubic => 3,
            OddPower::Quintic => 5,
        }
    }
}

/// Constant Rabi frequency with a detuning swept through resonance near each
/// center as `s1·x + s2·x^p`, `x = t - t_j`.
///
/// The time axis is split into one segment per center. Boundaries sit at the
/// midpoints between consecutive centers; the outer edges come from `window`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearDetuningPulse {
    pub rabi: f64,
    pub centers: Vec<f64>,
    pub slope: f64,
    pub odd_coeff: f64,
    pub odd_power: OddPower,
    pub window: Window,
}

impl NonlinearDetuningPulse {
    pub fn new(
        rabi: f64,
        centers: Vec<f64>,
        slope: f64,
        odd_coeff: f64,
        odd_power: OddPower,
        window: Window,
    ) -> Result<Self, PulseError> {
        if centers.is_empty() {
            return Err(PulseError::NoCenters);
        }
        if centers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PulseError::UnorderedCenters);
        }
        Ok(Self {
            rabi,
            centers,
            slope,
            odd_coeff,
            odd_power,
            window,
        })
    }

    /// Index of the segment containing `t`; a boundary belongs to the later segment.
    pub fn segment(&self, t: f64) -> usize {
        self.segment_boundaries().iter().take_while(|&&b| t >= b).count()
    }

    pub fn segment_boundaries(&self) -> Vec<f64> {
        self.centers.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Sweep profile relative to a center, without segment selection.
    pub fn profile(&self, x: f64) -> f64 {
        self.slope * x + self.odd_coeff * x.powi(self.odd_power.exponent())
    }

    fn profile_rate(&self, x: f64) -> f64 {
        let p = self.odd_power.exponent();
        self.slope + f64::from(p) * self.odd_coeff * x.powi(p - 1)
    }
}

impl TwoLevelDrive for NonlinearDetuningPulse {
    fn rabi(&self, _t: f64) -> f64 {
        self.rabi
    }

    fn detuning(&self, t: f64) -> f64 {
        self.profile(t - self.centers[self.segment(t)])
    }

    fn rabi_rate(&self, _t: f64) -> f64 {
        0.0
    }

    fn detuning_rate(&self, t: f64) -> f64 {
        self.profile_rate(t - self.centers[self.segment(t)])
    }

    fn support(&self) -> Window {
        self.window
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.segment_boundaries()
    }
}

/// Gaussian Stokes and pump envelopes with a fixed or sign-switched
/// intermediate detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StirapPair {
    pub stokes_peak: f64,
    pub pump_peak: f64,
    pub stokes_center: f64,
    pub pump_center: f64,
    pub width: f64,
    pub detuning: f64,
    pub detuning_rule: DetuningRule,
    pub field_sign: FieldSign,
}

impl StirapPair {
    pub fn new(
        stokes_peak: f64,
        pump_peak: f64,
        stokes_center: f64,
        pump_center: f64,
        width: f64,
        detuning: f64,
    ) -> Result<Self, PulseError> {
        if !(width.is_finite() && width > 0.0) {
            return Err(PulseError::NonPositiveWidth(width));
        }
        if stokes_center == pump_center {
            return Err(PulseError::CoincidentCenters(stokes_center));
        }
        Ok(Self {
            stokes_peak,
            pump_peak,
            stokes_center,
            pump_center,
            width,
            detuning,
            detuning_rule: DetuningRule::Constant,
            field_sign: FieldSign::Positive,
        })
    }

    pub fn with_rule(mut self, rule: DetuningRule) -> Self {
        self.detuning_rule = rule;
        self
    }

    /// Stokes precedes pump.
    pub fn is_counterintuitive(&self) -> bool {
        self.stokes_center < self.pump_center
    }

    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            stokes_center: self.stokes_center + dt,
            pump_center: self.pump_center + dt,
            ..*self
        }
    }

    /// Time reflection `t -> 2*about - t` of both envelopes.
    pub fn mirrored(&self, about: f64) -> Self {
        Self {
            stokes_center: 2.0 * about - self.stokes_center,
            pump_center: 2.0 * about - self.pump_center,
            ..*self
        }
    }
}

impl ThreeLevelDrive for StirapPair {
    fn pump(&self, t: f64) -> f64 {
        self.field_sign.factor() * self.pump_peak * gaussian(t, self.pump_center, self.width)
    }

    fn stokes(&self, t: f64) -> f64 {
        self.field_sign.factor() * self.stokes_peak * gaussian(t, self.stokes_center, self.width)
    }

    fn detuning(&self, t: f64) -> f64 {
        match self.detuning_rule {
            DetuningRule::Constant => self.detuning,
            DetuningRule::SignOfTime => self.detuning * sign_of_time(t),
        }
    }

    fn support(&self) -> Window {
        let half = gaussian_half_width(self.width, ENVELOPE_CUTOFF);
        Window {
            start: self.stokes_center.min(self.pump_center) - half,
            end: self.stokes_center.max(self.pump_center) + half,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self.detuning_rule {
            DetuningRule::SignOfTime if self.support().contains(0.0) => vec![0.0],
            _ => Vec::new(),
        }
    }
}

/// Pump and Stokes sharing a hypergaussian envelope, with the mixing between
/// them set by a logistic switch:
/// `P = A·F·cos(π/2·f)`, `S = A·F·sin(π/2·f)` evaluated at `t - center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizedStirapPair {
    pub amplitude: f64,
    pub hyper_width: f64,
    pub hyper_order: u32,
    pub steepness: f64,
    pub tau: f64,
    pub center: f64,
    pub detuning: f64,
}

impl OptimizedStirapPair {
    /// Builds the pair with the switching time `tau = hyper_width / 2`.
    pub fn new(
        amplitude: f64,
        hyper_width: f64,
        hyper_order: u32,
        steepness: f64,
        center: f64,
        detuning: f64,
    ) -> Result<Self, PulseError> {
        require_positive("hyper_width", hyper_width)?;
        require_positive("steepness", steepness)?;
        if hyper_order == 0 {
            return Err(PulseError::ZeroOrder);
        }
        Ok(Self {
            amplitude,
            hyper_width,
            hyper_order,
            steepness,
            tau: 0.5 * hyper_width,
            center,
            detuning,
        })
    }

    /// Hypergaussian `exp(-(x/T0)^(2n))`.
    pub fn envelope(&self, x: f64) -> f64 {
        let order = 2 * self.hyper_order as i32;
        (-(x / self.hyper_width).powi(order)).exp()
    }

    /// Logistic switch `1/(1 + exp(-λx/τ))`.
    pub fn switch(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-self.steepness * x / self.tau).exp())
    }
}

impl ThreeLevelDrive for OptimizedStirapPair {
    fn pump(&self, t: f64) -> f64 {
        let x = t - self.center;
        self.amplitude * self.envelope(x) * (FRAC_PI_2 * self.switch(x)).cos()
    }

    fn stokes(&self, t: f64) -> f64 {
        let x = t - self.center;
        self.amplitude * self.envelope(x) * (FRAC_PI_2 * self.switch(x)).sin()
    }

    fn detuning(&self, _t: f64) -> f64 {
        self.detuning
    }

    fn support(&self) -> Window {
        let order = 2.0 * f64::from(self.hyper_order);
        let half = self.hyper_width * (1.0 / ENVELOPE_CUTOFF).ln().powf(1.0 / order);
        Window {
            start: self.center - half,
            end: self.center + half,
        }
    }
}

/// How the second pulse of a double sequence relates to the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoubleMode {
    Identical,
    /// The second field has the opposite sign.
    PhaseFlipped,
    /// The second pulse's detuning is negated.
    DetuningSignSwitched,
}

/// Two pulses applied one after the other.
///
/// Field amplitudes of both pulses add. The detuning follows the first pulse
/// before `switch_time` and the second pulse from `switch_time` on, so the
/// sweep restarts at the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleSequence<P> {
    pub first: P,
    pub second: P,
    pub mode: DoubleMode,
    pub switch_time: f64,
}

impl<P> DoubleSequence<P> {
    fn second_field_factor(&self) -> f64 {
        match self.mode {
            DoubleMode::PhaseFlipped => -1.0,
            _ => 1.0,
        }
    }

    fn second_detuning_factor(&self) -> f64 {
        match self.mode {
            DoubleMode::DetuningSignSwitched => -1.0,
            _ => 1.0,
        }
    }
}

impl DoubleSequence<TwoLevelPulse> {
    /// First pulse followed by a copy of it delayed by `delay`; the switch
    /// sits halfway between the two centers.
    pub fn repeated(first: TwoLevelPulse, delay: f64, mode: DoubleMode) -> Self {
        let second = first.shifted(delay);
        let switch_time = first.reference_time() + 0.5 * delay;
        Self {
            first,
            second,
            mode,
            switch_time,
        }
    }

    /// Length of the interval covered by both supports (zero when disjoint).
    pub fn overlap(&self) -> f64 {
        support_overlap(self.first.support(), self.second.support())
    }
}

impl DoubleSequence<StirapPulse> {
    /// First pair followed by its time mirror image about `about`.
    pub fn mirrored(first: StirapPair, about: f64, mode: DoubleMode) -> Self {
        Self {
            second: StirapPulse::Gaussian(first.mirrored(about)),
            first: StirapPulse::Gaussian(first),
            mode,
            switch_time: about,
        }
    }

    pub fn overlap(&self) -> f64 {
        support_overlap(self.first.support(), self.second.support())
    }
}

fn support_overlap(a: Window, b: Window) -> f64 {
    (a.end.min(b.end) - a.start.max(b.start)).max(0.0)
}

impl<P: TwoLevelDrive> TwoLevelDrive for DoubleSequence<P> {
    fn rabi(&self, t: f64) -> f64 {
        self.first.rabi(t) + self.second_field_factor() * self.second.rabi(t)
    }

    fn detuning(&self, t: f64) -> f64 {
        if t < self.switch_time {
            self.first.detuning(t)
        } else {
            self.second_detuning_factor() * self.second.detuning(t)
        }
    }

    fn rabi_rate(&self, t: f64) -> f64 {
        self.first.rabi_rate(t) + self.second_field_factor() * self.second.rabi_rate(t)
    }

    fn detuning_rate(&self, t: f64) -> f64 {
        if t < self.switch_time {
            self.first.detuning_rate(t)
        } else {
            self.second_detuning_factor() * self.second.detuning_rate(t)
        }
    }

    fn support(&self) -> Window {
        self.first.support().union(&self.second.support())
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut points = vec![self.switch_time];
        points.extend(self.first.breakpoints());
        points.extend(self.second.breakpoints());
        points
    }
}

impl<P: ThreeLevelDrive> ThreeLevelDrive for DoubleSequence<P> {
    fn pump(&self, t: f64) -> f64 {
        self.first.pump(t) + self.second_field_factor() * self.second.pump(t)
    }

    fn stokes(&self, t: f64) -> f64 {
        self.first.stokes(t) + self.second_field_factor() * self.second.stokes(t)
    }

    fn detuning(&self, t: f64) -> f64 {
        if t < self.switch_time {
            self.first.detuning(t)
        } else {
            self.second_detuning_factor() * self.second.detuning(t)
        }
    }

    fn support(&self) -> Window {
        self.first.support().union(&self.second.support())
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut points = vec![self.switch_time];
        points.extend(self.first.breakpoints());
        points.extend(self.second.breakpoints());
        points
    }
}

/// Any two-level drive used by the models.
#[derive(Debug, Clone, PartialEq)]
pub enum TwoLevelPulse {
    GaussianChirp(GaussianChirpPulse),
    Square(SquarePulse),
    Nonlinear(NonlinearDetuningPulse),
    Double(Box<DoubleSequence<TwoLevelPulse>>),
}

impl TwoLevelPulse {
    pub fn shifted(&self, dt: f64) -> Self {
        match self {
            TwoLevelPulse::GaussianChirp(p) => TwoLevelPulse::GaussianChirp(p.shifted(dt)),
            TwoLevelPulse::Square(p) => TwoLevelPulse::Square(SquarePulse {
                window: p.window.shifted(dt),
                ..*p
            }),
            TwoLevelPulse::Nonlinear(p) => TwoLevelPulse::Nonlinear(NonlinearDetuningPulse {
                centers: p.centers.iter().map(|c| c + dt).collect(),
                window: p.window.shifted(dt),
                ..p.clone()
            }),
            TwoLevelPulse::Double(d) => TwoLevelPulse::Double(Box::new(DoubleSequence {
                first: d.first.shifted(dt),
                second: d.second.shifted(dt),
                mode: d.mode,
                switch_time: d.switch_time + dt,
            })),
        }
    }

    /// Characteristic time of the pulse: its center, or the window midpoint.
    pub fn reference_time(&self) -> f64 {
        match self {
            TwoLevelPulse::GaussianChirp(p) => p.center,
            _ => {
                let w = self.support();
                0.5 * (w.start + w.end)
            }
        }
    }
}

macro_rules! delegate_two_level {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            TwoLevelPulse::GaussianChirp($p) => $e,
            TwoLevelPulse::Square($p) => $e,
            TwoLevelPulse::Nonlinear($p) => $e,
            TwoLevelPulse::Double($p) => $e,
        }
    };
}

impl TwoLevelDrive for TwoLevelPulse {
    fn rabi(&self, t: f64) -> f64 {
        delegate_two_level!(self, p => p.rabi(t))
    }
    fn detuning(&self, t: f64) -> f64 {
        delegate_two_level!(self, p => p.detuning(t))
    }
    fn rabi_rate(&self, t: f64) -> f64 {
        delegate_two_level!(self, p => p.rabi_rate(t))
    }
    fn detuning_rate(&self, t: f64) -> f64 {
        delegate_two_level!(self, p => p.detuning_rate(t))
    }
    fn support(&self) -> Window {
        delegate_two_level!(self, p => p.support())
    }
    fn breakpoints(&self) -> Vec<f64> {
        delegate_two_level!(self, p => p.breakpoints())
    }
}

impl From<GaussianChirpPulse> for TwoLevelPulse {
    fn from(p: GaussianChirpPulse) -> Self {
        TwoLevelPulse::GaussianChirp(p)
    }
}

impl From<SquarePulse> for TwoLevelPulse {
    fn from(p: SquarePulse) -> Self {
        TwoLevelPulse::Square(p)
    }
}

impl From<NonlinearDetuningPulse> for TwoLevelPulse {
    fn from(p: NonlinearDetuningPulse) -> Self {
        TwoLevelPulse::Nonlinear(p)
    }
}

impl From<DoubleSequence<TwoLevelPulse>> for TwoLevelPulse {
    fn from(d: DoubleSequence<TwoLevelPulse>) -> Self {
        TwoLevelPulse::Double(Box::new(d))
    }
}

/// Any pump/Stokes drive used by the models.
#[derive(Debug, Clone, PartialEq)]
pub enum StirapPulse {
    Gaussian(StirapPair),
    Optimized(OptimizedStirapPair),
    Double(Box<DoubleSequence<StirapPulse>>),
}

macro_rules! delegate_three_level {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            StirapPulse::Gaussian($p) => $e,
            StirapPulse::Optimized($p) => $e,
            StirapPulse::Double($p) => $e,
        }
    };
}

impl ThreeLevelDrive for StirapPulse {
    fn pump(&self, t: f64) -> f64 {
        delegate_three_level!(self, p => p.pump(t))
    }
    fn stokes(&self, t: f64) -> f64 {
        delegate_three_level!(self, p => p.stokes(t))
    }
    fn detuning(&self, t: f64) -> f64 {
        delegate_three_level!(self, p => p.detuning(t))
    }
    fn support(&self) -> Window {
        delegate_three_level!(self, p => p.support())
    }
    fn breakpoints(&self) -> Vec<f64> {
        delegate_three_level!(self, p => p.breakpoints())
    }
}

impl From<StirapPair> for StirapPulse {
    fn from(p: StirapPair) -> Self {
        StirapPulse::Gaussian(p)
    }
}

impl From<OptimizedStirapPair> for StirapPulse {
    fn from(p: OptimizedStirapPair) -> Self {
        StirapPulse::Optimized(p)
    }
}

impl From<DoubleSequence<StirapPulse>> for StirapPulse {
    fn from(d: DoubleSequence<StirapPulse>) -> Self {
        StirapPulse::Double(Box::new(d))
    }
}
