use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Point2;

/// One of the four grid directions a vehicle can drive along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heading {
    North,
    South,
    West,
    East,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::South, Heading::West, Heading::East];

    /// Unit step in junction-index space (north = +y, east = +x).
    pub fn delta(&self) -> (i64, i64) {
        match self {
            Heading::North => (0, 1),
            Heading::South => (0, -1),
            Heading::West => (-1, 0),
            Heading::East => (1, 0),
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

/// Grid intersection, indexed by column `i` (x) and row `j` (y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Junction {
    pub i: usize,
    pub j: usize,
}

/// Axis-aligned road grid over `[0, side]^2` with one road every `block_size`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadNetwork {
    block_size: f64,
    /// Blocks per axis; junction indices run over `0..=blocks`.
    blocks: usize,
}

impl RoadNetwork {
    /// `side` must be a whole number of blocks; callers validate that first.
    pub fn new(side: f64, block_size: f64) -> Self {
        Self {
            block_size,
            blocks: (side / block_size).round() as usize,
        }
    }

    pub fn block_size(&self) -> f64 {
        self.block_size
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn junction_count(&self) -> usize {
        (self.blocks + 1) * (self.blocks + 1)
    }

    pub fn position(&self, junction: Junction) -> Point2 {
        Point2::new(
            junction.i as f64 * self.block_size,
            junction.j as f64 * self.block_size,
        )
    }

    /// Coordinates of every road line along one axis.
    pub fn lines(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.blocks).map(|k| k as f64 * self.block_size)
    }

    pub fn neighbor(&self, junction: Junction, heading: Heading) -> Option<Junction> {
        let (di, dj) = heading.delta();
        let i = junction.i as i64 + di;
        let j = junction.j as i64 + dj;
        let max = self.blocks as i64;
        ((0..=max).contains(&i) && (0..=max).contains(&j)).then_some(Junction {
            i: i as usize,
            j: j as usize,
        })
    }

    /// Directions with a road segment leaving `junction`, in `Heading::ALL` order.
    pub fn incident(&self, junction: Junction) -> Vec<Heading> {
        Heading::ALL
            .into_iter()
            .filter(|h| self.neighbor(junction, *h).is_some())
            .collect()
    }

    /// Uniform draw over the segments incident to `junction`. Reversal is allowed.
    pub fn sample_heading<R: Rng + ?Sized>(&self, junction: Junction, rng: &mut R) -> Heading {
        let options = self.incident(junction);
        options[rng.random_range(0..options.len())]
    }

    pub fn random_junction<R: Rng + ?Sized>(&self, rng: &mut R) -> Junction {
        Junction {
            i: rng.random_range(0..=self.blocks),
            j: rng.random_range(0..=self.blocks),
        }
    }

    /// True if `p` lies on a road line inside the arena.
    pub fn on_road(&self, p: &Point2) -> bool {
        let side = self.blocks as f64 * self.block_size;
        let on_line = |v: f64| {
            let k = (v / self.block_size).round();
            (0.0..=self.blocks as f64).contains(&k) && (v - k * self.block_size).abs() <= 1e-9
        };
        (0.0..=side).contains(&p.x) && (0.0..=side).contains(&p.y) && (on_line(p.x) || on_line(p.y))
    }
}

/// Target vehicle pose on the road grid: last junction passed, direction of
/// travel and distance covered along the current segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub from: Junction,
    pub heading: Heading,
    /// Distance travelled from `from`, in `[0, block_size)`.
    pub progress: f64,
    /// Constant for the episode.
    pub speed: f64,
}

impl TargetState {
    pub fn position(&self, road: &RoadNetwork) -> Point2 {
        let base = road.position(self.from);
        let (di, dj) = self.heading.delta();
        Point2::new(
            base.x + di as f64 * self.progress,
            base.y + dj as f64 * self.progress,
        )
    }

    pub fn at_junction(&self) -> bool {
        self.progress == 0.0
    }

    /// Advance one step. Movement that would pass the next junction stops
    /// there and a fresh heading is drawn for the following step.
    pub fn step<R: Rng + ?Sized>(&mut self, road: &RoadNetwork, rng: &mut R) {
        let remaining = road.block_size() - self.progress;
        if self.speed >= remaining {
            // Headings are always drawn from incident segments, so the neighbour exists.
            self.from = road
                .neighbor(self.from, self.heading)
                .expect("target heading leads off the road grid");
            self.progress = 0.0;
            self.heading = road.sample_heading(self.from, rng);
        } else {
            self.progress += self.speed;
        }
    }
}
