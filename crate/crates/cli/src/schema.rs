//! JSON problem specifications: serde shapes, strict validation, and the
//! conversions into library types. Unknown fields are rejected everywhere and
//! rationals travel as "num/den" strings.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use filterlab_core::antichain::{AntichainFamily, AntichainStage};
use filterlab_core::bias::{BiasSequence, TailClass};
use filterlab_core::covers::{EpsilonSchedule, PrefixCover};
use filterlab_core::filters::{canonical_filter, CanonicalKind, FilterBase};
use filterlab_core::halving::{HalvingGrid, Halves, SelectionStrategy};
use filterlab_core::interval::Interval;
use filterlab_core::trace::{CylinderFamily, FiniteTrace};
use filterlab_core::{Rational, Result};

/// Exact rational carried as a "num/den" string in JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct Rat(pub Rational);

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Rational::from_str(&s)
            .map(Rat)
            .map_err(serde::de::Error::custom)
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(&self.0)
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub version: String,
    pub command: String,
    pub payload: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSpec {
    #[serde(default)]
    pub prefix: Vec<Rat>,
    pub tail: TailSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailSpec {
    Constant { value: Rat },
    PowerLaw { scale: Rat, exponent: u32 },
    Geometric { scale: Rat, ratio: Rat },
    Unspecified,
}

impl BiasSpec {
    pub fn build(&self) -> Result<BiasSequence> {
        let prefix = self.prefix.iter().map(|r| r.0.clone()).collect();
        let tail = match &self.tail {
            TailSpec::Constant { value } => TailClass::Constant(value.0.clone()),
            TailSpec::PowerLaw { scale, exponent } => TailClass::PowerLaw {
                scale: scale.0.clone(),
                exponent: *exponent,
            },
            TailSpec::Geometric { scale, ratio } => TailClass::Geometric {
                scale: scale.0.clone(),
                ratio: ratio.0.clone(),
            },
            TailSpec::Unspecified => TailClass::Unspecified,
        };
        BiasSequence::new(prefix, tail)
    }
}

/// Render a bias sequence back into its spec shape, for conjugate outputs.
pub fn bias_to_spec(p: &BiasSequence) -> BiasSpec {
    let tail = match p.tail() {
        TailClass::Constant(c) => TailSpec::Constant {
            value: Rat(c.clone()),
        },
        TailClass::PowerLaw { scale, exponent } => TailSpec::PowerLaw {
            scale: Rat(scale.clone()),
            exponent: *exponent,
        },
        TailClass::Geometric { scale, ratio } => TailSpec::Geometric {
            scale: Rat(scale.clone()),
            ratio: Rat(ratio.clone()),
        },
        TailClass::Unspecified => TailSpec::Unspecified,
    };
    BiasSpec {
        prefix: p.prefix().iter().cloned().map(Rat).collect(),
        tail,
    }
}

/// Cylinder family as bit strings over an explicit domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub domain: Vec<u32>,
    pub traces: Vec<String>,
}

impl FamilySpec {
    pub fn build(&self) -> Result<CylinderFamily> {
        let traces = self
            .traces
            .iter()
            .map(|s| FiniteTrace::from_bit_string(self.domain.clone(), s))
            .collect::<Result<Vec<_>>>()?;
        CylinderFamily::new(self.domain.clone(), traces)
    }
}

/// Partial trace as bits over an explicit domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub domain: Vec<u32>,
    pub bits: String,
}

impl TraceSpec {
    pub fn build(&self) -> Result<FiniteTrace> {
        FiniteTrace::from_bit_string(self.domain.clone(), &self.bits)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub bias: BiasSpec,
    pub family: FamilySpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Max,
    Union { dominating: BiasSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugateSpec {
    pub bias: BiasSpec,
    pub map: MapSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PushforwardSpec {
    pub bias: BiasSpec,
    pub aux: BiasSpec,
    pub target: BiasSpec,
    pub trace: TraceSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub level: u32,
    /// Bit strings over `[0, level)`.
    pub traces: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Geometric { first: Rat, ratio: Rat, len: usize },
    Explicit { terms: Vec<Rat>, tail_bound: Rat },
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<EpsilonSchedule> {
        match self {
            ScheduleSpec::Geometric { first, ratio, len } => {
                EpsilonSchedule::geometric(first.0.clone(), ratio.0.clone(), *len)
            }
            ScheduleSpec::Explicit { terms, tail_bound } => EpsilonSchedule::new(
                terms.iter().map(|r| r.0.clone()).collect(),
                tail_bound.0.clone(),
            ),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeSpec {
    pub bias: BiasSpec,
    pub window: u32,
    pub levels: Vec<LevelSpec>,
    #[serde(default)]
    pub tail_bound: Option<Rat>,
    pub schedule: ScheduleSpec,
}

impl DecomposeSpec {
    pub fn build_cover(&self, p: &BiasSequence, cap: usize) -> Result<PrefixCover> {
        let mut levels = BTreeMap::new();
        for spec in &self.levels {
            let domain: Vec<u32> = (0..spec.level).collect();
            let traces = spec
                .traces
                .iter()
                .map(|s| FiniteTrace::from_bit_string(domain.clone(), s))
                .collect::<Result<Vec<_>>>()?;
            let fam = CylinderFamily::new(domain, traces)?;
            if levels.insert(spec.level, fam).is_some() {
                return Err(filterlab_core::Error::Invalid {
                    what: "cover",
                    detail: format!("level {} is listed twice", spec.level),
                });
            }
        }
        let tail = self
            .tail_bound
            .as_ref()
            .map_or_else(Rational::zero, |r| r.0.clone());
        PrefixCover::new(levels, tail, p, cap)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntichainSpec {
    pub family: FamilySpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub start: u32,
    pub end: u32,
    pub members: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WitnessSpec {
    /// One point just past each stage's growth bound.
    Greedy { window: u32 },
    Explicit { window: u32, ones: Vec<u32> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RapidSpec {
    pub stages: Vec<StageSpec>,
    #[serde(default)]
    pub tail_bound: Option<Rat>,
    pub witness: WitnessSpec,
}

impl RapidSpec {
    /// Weights are judged under the uniform bias, so the family is built
    /// under it as well.
    pub fn build_family(&self, cap: usize) -> Result<AntichainFamily> {
        let stages = self
            .stages
            .iter()
            .map(|s| {
                AntichainStage::new(Interval::new(s.start, s.end)?, s.members.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        let tail = self
            .tail_bound
            .as_ref()
            .map_or_else(Rational::zero, |r| r.0.clone());
        AntichainFamily::new(stages, tail, &BiasSequence::uniform(), cap)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseSpec {
    Explicit {
        window: u32,
        margin: u32,
        /// One-positions per generator, over the full window.
        generators: Vec<Vec<u32>>,
    },
    Frechet {
        window: u32,
        k_max: u32,
    },
}

impl BaseSpec {
    pub fn build(&self) -> Result<FilterBase> {
        match self {
            BaseSpec::Explicit {
                window,
                margin,
                generators,
            } => {
                let traces = generators
                    .iter()
                    .map(|ones| FiniteTrace::window(*window, ones))
                    .collect::<Result<Vec<_>>>()?;
                FilterBase::new(*window, traces, *margin)
            }
            BaseSpec::Frechet { window, k_max } => {
                canonical_filter(CanonicalKind::Frechet { k_max: *k_max }, *window)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaireMode {
    Search,
    Check { cuts: Vec<u32> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaireSpec {
    pub base: BaseSpec,
    pub mode: BaireMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub level: u32,
    pub column: u32,
    pub coords: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Packed { k_max: u32, l_max: u32 },
    Explicit { cells: Vec<CellSpec> },
}

impl GridSpec {
    pub fn build(&self) -> Result<HalvingGrid> {
        match self {
            GridSpec::Packed { k_max, l_max } => HalvingGrid::packed(*k_max, *l_max),
            GridSpec::Explicit { cells } => {
                let mut map: Halves = BTreeMap::new();
                for cell in cells {
                    let key = (cell.level, cell.column);
                    if map.insert(key, cell.coords.clone()).is_some() {
                        return Err(filterlab_core::Error::Invalid {
                            what: "grid",
                            detail: format!(
                                "cell ({}, {}) is listed twice",
                                cell.level, cell.column
                            ),
                        });
                    }
                }
                HalvingGrid::new(map)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    Exhaustive,
    MonteCarlo { seed: u64, trials: u64 },
}

impl StrategySpec {
    pub fn build(&self) -> SelectionStrategy {
        match self {
            StrategySpec::Exhaustive => SelectionStrategy::Exhaustive,
            StrategySpec::MonteCarlo { seed, trials } => SelectionStrategy::MonteCarlo {
                seed: *seed,
                trials: *trials,
            },
        }
    }

    fn reseed(&mut self, new_seed: u64) -> bool {
        if let StrategySpec::MonteCarlo { seed, .. } = self {
            *seed = new_seed;
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalvesSpec {
    pub grid: GridSpec,
    pub constraints: Vec<Vec<u32>>,
    pub strategy: StrategySpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessorSpec {
    pub window: u32,
    /// One-positions per generator, over the full window.
    pub generators: Vec<Vec<u32>>,
    pub grid: GridSpec,
    pub schedule: Vec<u32>,
    pub constraints: Vec<Vec<u32>>,
    pub strategy: StrategySpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSpec {
    pub bias: BiasSpec,
    pub exponent: u32,
    pub start: u32,
}

#[derive(Debug, Clone)]
pub enum Command {
    Measure(MeasureSpec),
    Conjugate(ConjugateSpec),
    Pushforward(PushforwardSpec),
    Decompose(DecomposeSpec),
    Antichain(AntichainSpec),
    Rapid(RapidSpec),
    Baire(BaireSpec),
    Halves(HalvesSpec),
    Successor(SuccessorSpec),
    Certificate(CertificateSpec),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Measure(_) => "measure",
            Command::Conjugate(_) => "conjugate",
            Command::Pushforward(_) => "pushforward",
            Command::Decompose(_) => "decompose",
            Command::Antichain(_) => "antichain",
            Command::Rapid(_) => "rapid",
            Command::Baire(_) => "baire",
            Command::Halves(_) => "halves",
            Command::Successor(_) => "successor",
            Command::Certificate(_) => "certificate",
        }
    }

    /// Replace the Monte Carlo seed where one applies; false when the
    /// command has no randomized strategy.
    pub fn reseed(&mut self, seed: u64) -> bool {
        match self {
            Command::Halves(s) => s.strategy.reseed(seed),
            Command::Successor(s) => s.strategy.reseed(seed),
            _ => false,
        }
    }

    /// The payload as canonical JSON, with defaults and overrides applied.
    pub fn payload_value(&self) -> Value {
        let result = match self {
            Command::Measure(s) => serde_json::to_value(s),
            Command::Conjugate(s) => serde_json::to_value(s),
            Command::Pushforward(s) => serde_json::to_value(s),
            Command::Decompose(s) => serde_json::to_value(s),
            Command::Antichain(s) => serde_json::to_value(s),
            Command::Rapid(s) => serde_json::to_value(s),
            Command::Baire(s) => serde_json::to_value(s),
            Command::Halves(s) => serde_json::to_value(s),
            Command::Successor(s) => serde_json::to_value(s),
            Command::Certificate(s) => serde_json::to_value(s),
        };
        result.expect("payload specs serialize")
    }
}

pub const SPEC_VERSION: &str = "1";

fn from_payload<T: DeserializeOwned>(payload: Value) -> std::result::Result<T, String> {
    serde_path_to_error::deserialize(payload).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            format!("payload: {inner}")
        } else {
            format!("payload.{path}: {inner}")
        }
    })
}

/// Validate a raw spec document into a dispatchable command.
pub fn parse_spec(bytes: &[u8]) -> std::result::Result<Command, String> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let file: SpecFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        format!("{path}: {}", e.into_inner())
    })?;
    if file.version != SPEC_VERSION {
        return Err(format!(
            "unsupported spec version {:?} (expected {:?})",
            file.version, SPEC_VERSION
        ));
    }
    match file.command.as_str() {
        "measure" => from_payload(file.payload).map(Command::Measure),
        "conjugate" => from_payload(file.payload).map(Command::Conjugate),
        "pushforward" => from_payload(file.payload).map(Command::Pushforward),
        "decompose" => from_payload(file.payload).map(Command::Decompose),
        "antichain" => from_payload(file.payload).map(Command::Antichain),
        "rapid" => from_payload(file.payload).map(Command::Rapid),
        "baire" => from_payload(file.payload).map(Command::Baire),
        "halves" => from_payload(file.payload).map(Command::Halves),
        "successor" => from_payload(file.payload).map(Command::Successor),
        "certificate" => from_payload(file.payload).map(Command::Certificate),
        other => Err(format!("unknown command {other:?}")),
    }
}
