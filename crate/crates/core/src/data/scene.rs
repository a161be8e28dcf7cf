use serde::{Deserialize, Serialize};

/// Rigid transform from raw map coordinates into the host-centred frame.
///
/// `local = R(-rotation) * (raw - origin)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationFrame {
    pub origin: [f64; 2],
    /// Host heading in the raw frame (rad).
    pub rotation: f64,
}

impl NormalizationFrame {
    pub const IDENTITY: NormalizationFrame = NormalizationFrame {
        origin: [0.0, 0.0],
        rotation: 0.0,
    };

    pub fn to_local(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.rotation.sin_cos();
        let (dx, dy) = (p[0] - self.origin[0], p[1] - self.origin[1]);
        [c * dx + s * dy, -s * dx + c * dy]
    }

    pub fn to_raw(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.rotation.sin_cos();
        [
            c * p[0] - s * p[1] + self.origin[0],
            s * p[0] + c * p[1] + self.origin[1],
        ]
    }
}

/// One prediction problem: a host plus its ambient vehicles, with history
/// and ground-truth futures in the host-centred frame.
///
/// Row 0 of `history` and `future` is always the host.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub name: String,
    pub recording: String,
    /// Vehicle ids; index 0 is the host.
    pub vehicle_ids: Vec<u64>,
    /// s
    pub dt: f64,
    /// First history frame number in the source recording.
    pub start_frame: i64,
    /// `N x T_h` positions (m).
    pub history: Vec<Vec<[f64; 2]>>,
    /// `N x T_p` positions (m), frames after the last history frame.
    pub future: Vec<Vec<[f64; 2]>>,
    pub frame: NormalizationFrame,
}

impl Scene {
    pub fn host_id(&self) -> u64 {
        self.vehicle_ids[0]
    }

    pub fn ambient_ids(&self) -> &[u64] {
        &self.vehicle_ids[1..]
    }

    pub fn num_vehicles(&self) -> usize {
        self.vehicle_ids.len()
    }

    pub fn num_ambient(&self) -> usize {
        self.vehicle_ids.len() - 1
    }

    pub fn history_len(&self) -> usize {
        self.history[0].len()
    }

    pub fn future_len(&self) -> usize {
        self.future[0].len()
    }

    pub fn host_history(&self) -> &[[f64; 2]] {
        &self.history[0]
    }

    pub fn host_future(&self) -> &[[f64; 2]] {
        &self.future[0]
    }

    /// Last observed position of vehicle `i`.
    pub fn last_position(&self, i: usize) -> [f64; 2] {
        *self.history[i].last().expect("non-empty history")
    }

    /// Reorders the ambient vehicles; `order` is a permutation of
    /// `0..num_ambient()`. The host stays in row 0.
    pub fn permute_ambient(&self, order: &[usize]) -> Scene {
        let pick = |rows: &Vec<Vec<[f64; 2]>>| {
            std::iter::once(rows[0].clone())
                .chain(order.iter().map(|&k| rows[k + 1].clone()))
                .collect()
        };
        Scene {
            vehicle_ids: std::iter::once(self.vehicle_ids[0])
                .chain(order.iter().map(|&k| self.vehicle_ids[k + 1]))
                .collect(),
            history: pick(&self.history),
            future: pick(&self.future),
            ..self.clone()
        }
    }
}
