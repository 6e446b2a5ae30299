use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CapacityError {
    #[error("no memory requests given")]
    EmptyRequestList,
    #[error("memory request {index} is not positive: {value}")]
    NonPositiveRequest { index: usize, value: f64 },
}

/// Number of concurrent functions a node can host: its memory divided by
/// the mean memory requested per function, rounded down.
pub fn capacity_estimate(node_memory: f64, requested: &[f64]) -> Result<u64, CapacityError> {
    if requested.is_empty() {
        return Err(CapacityError::EmptyRequestList);
    }
    if let Some((index, &value)) = requested
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
    {
        return Err(CapacityError::NonPositiveRequest { index, value });
    }
    let mean = requested.iter().sum::<f64>() / requested.len() as f64;
    Ok((node_memory.max(0.0) / mean).floor() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(capacity_estimate(4096.0, &[256.0; 8]), Ok(16));
        assert_eq!(capacity_estimate(1024.0, &[128.0, 384.0]), Ok(4));
        assert_eq!(capacity_estimate(100.0, &[256.0]), Ok(0));
    }

    #[test]
    fn errors() {
        assert_eq!(
            capacity_estimate(1.0, &[]),
            Err(CapacityError::EmptyRequestList)
        );
        assert!(matches!(
            capacity_estimate(1.0, &[1.0, 0.0]),
            Err(CapacityError::NonPositiveRequest { index: 1, .. })
        ));
    }
}
