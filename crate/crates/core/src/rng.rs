//! Deterministic pseudo-random streams.
//!
//! All randomness in this crate flows through [`SeededStream`], a pair
//! `(seed, stream)` that expands into an independent xoshiro256++ generator.
//! The expansion is pure integer arithmetic, so a given `(seed, stream)` pair
//! produces the same sequence on every platform and at every thread count.
//! Parallel drivers assign one stream per work item and assemble results in
//! index order, which keeps output independent of scheduling.
//!
//! Uniform doubles are taken from the top 53 bits of each output word, offset
//! by half a grid step so the values lie strictly inside (0, 1). The grid is
//! exactly symmetric under u -> 1 - u, which the antithetic draw machinery in
//! `mvn` relies on.

/// Multiplier from the splitmix64 reference sequence; also used as an odd
/// constant when folding stream labels into seed material.
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 finalizer: bijective avalanche mix of one 64-bit word.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// splitmix64 generator, used only to expand seeds into xoshiro state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(state: u64) -> Self {
        SplitMix64 { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }
}

/// xoshiro256++ generator (Blackman and Vigna), period 2^256 - 1.
#[derive(Debug, Clone)]
pub struct Xoshiro256pp {
    s: [u64; 4],
}

impl Xoshiro256pp {
    /// Builds a generator whose state words are four successive splitmix64
    /// outputs, the seeding scheme recommended by the xoshiro authors.
    pub fn from_splitmix(init: u64) -> Self {
        let mut sm = SplitMix64::new(init);
        let mut s = [0u64; 4];
        for w in s.iter_mut() {
            *w = sm.next_u64();
        }
        if s == [0, 0, 0, 0] {
            s[0] = GOLDEN;
        }
        Xoshiro256pp { s }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform double strictly inside (0, 1): `(top53 + 0.5) * 2^-53`.
    ///
    /// The attainable grid is closed under u -> 1 - u exactly, so negating a
    /// standard normal draw is distributionally identical to drawing from the
    /// mirrored uniform.
    #[inline]
    pub fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }
}

/// Addressable random stream: a root seed plus a stream index.
///
/// Distinct `(seed, stream)` pairs expand to xoshiro generators seeded from
/// distinct splitmix64 states, giving streams with no practical overlap.
/// [`SeededStream::derive`] folds the current pair and a salt into a fresh
/// seed, which gives nested components (calibration, permutations, bootstrap
/// replicates) their own stream spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeededStream {
    pub seed: u64,
    pub stream: u64,
}

impl SeededStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        SeededStream { seed, stream }
    }

    /// Same seed space, different stream index.
    pub fn with_stream(&self, stream: u64) -> Self {
        SeededStream {
            seed: self.seed,
            stream,
        }
    }

    /// Child seed space: `(seed, stream, salt)` folded into a fresh seed.
    pub fn derive(&self, salt: u64) -> Self {
        let folded =
            mix64(self.seed ^ mix64(self.stream ^ GOLDEN.wrapping_mul(salt).wrapping_add(GOLDEN)));
        SeededStream {
            seed: folded,
            stream: 0,
        }
    }

    /// Expands this stream into its generator.
    pub fn rng(&self) -> Xoshiro256pp {
        Xoshiro256pp::from_splitmix(self.seed ^ self.stream.wrapping_mul(GOLDEN))
    }
}
