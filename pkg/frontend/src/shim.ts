/**
 * Trainer-side shim for the reward service.
 *
 * Converts rollout batches into the service's line-delimited JSON wire
 * format (`POST /score`), and returns per-trajectory reward breakdowns with
 * per-token arrays aligned to the supplied role masks. The shim performs no
 * reward math of its own: it is transport plus alignment only.
 */

/** Trajectory document as produced by the simulator (opaque to the shim). */
export type TrajectoryDoc = Record<string, unknown>;

export interface RolloutBatch {
  /** One trajectory document per rollout. */
  trajectories: TrajectoryDoc[];
  /** Per-trajectory token role lists ("shopper" | "other"), one entry per
   * token of the trainer's own tokenization. */
  tokenRoleMasks: string[][];
  /** Optional per-batch reward-weight override, by component name. */
  weights?: Record<string, number>;
}

export interface RewardBreakdown {
  ok: true;
  personaId: string;
  /** Component values; null marks a component the service deemed unavailable. */
  components: Record<string, number | null>;
  /** Normalized weights actually applied over the available components. */
  weightsUsed: Record<string, number>;
  aggregate: number;
  /** Per-token rewards, same length and order as the supplied mask. */
  rewards: number[];
}

export interface RewardError {
  ok: false;
  /** Service-side error message for this item; other items are unaffected. */
  error: string;
}

export type ShimResult = RewardBreakdown | RewardError;

/** Raised when the service itself is unreachable or answers non-200. */
export class RewardServiceError extends Error {}

interface WireResult {
  persona_id?: string;
  components?: Record<string, number | null>;
  weights_used?: Record<string, number>;
  aggregate?: number;
  rewards?: number[];
  error?: string;
}

function validateBatch(batch: RolloutBatch): void {
  if (batch.trajectories.length !== batch.tokenRoleMasks.length) {
    throw new RewardServiceError(
      `batch shape mismatch: ${batch.trajectories.length} trajectories vs ` +
      `${batch.tokenRoleMasks.length} masks`,
    );
  }
  batch.tokenRoleMasks.forEach((mask, i) => {
    if (mask.length === 0) {
      throw new RewardServiceError(`empty token role mask at index ${i}`);
    }
  });
}

function toWireLines(batch: RolloutBatch): string {
  return batch.trajectories
    .map((trajectory, i) =>
      JSON.stringify({
        trajectory,
        token_role_mask: batch.tokenRoleMasks[i],
        ...(batch.weights ? { weights: batch.weights } : {}),
      }),
    )
    .join("\n");
}

/** Probe the service's liveness endpoint. */
export async function healthCheck(serviceUrl: string): Promise<boolean> {
  try {
    const response = await fetch(new URL("/healthz", serviceUrl));
    return response.ok;
  } catch {
    return false;
  }
}

/**
 * Score one rollout batch against a running reward service.
 *
 * Responses are order-preserving: result i corresponds to trajectory i.
 * Per-trajectory service errors surface as `{ok: false}` items; only an
 * unreachable service rejects the whole call.
 */
export async function scoreBatch(
  batch: RolloutBatch,
  serviceUrl: string,
): Promise<ShimResult[]> {
  validateBatch(batch);
  if (batch.trajectories.length === 0) {
    return [];
  }
  let response: Response;
  try {
    response = await fetch(new URL("/score", serviceUrl), {
      method: "POST",
      headers: { "Content-Type": "application/x-ndjson" },
      body: toWireLines(batch),
    });
  } catch (cause) {
    throw new RewardServiceError(`reward service unreachable: ${cause}`);
  }
  if (!response.ok) {
    throw new RewardServiceError(
      `reward service answered ${response.status}`,
    );
  }
  const lines = (await response.text())
    .split("\n")
    .filter((line) => line.trim().length > 0);
  if (lines.length !== batch.trajectories.length) {
    throw new RewardServiceError(
      `response count mismatch: sent ${batch.trajectories.length}, ` +
      `received ${lines.length}`,
    );
  }
  return lines.map((line, i) => {
    const wire = JSON.parse(line) as WireResult;
    if (wire.error !== undefined) {
      return { ok: false, error: wire.error } satisfies RewardError;
    }
    const rewards = wire.rewards ?? [];
    const mask = batch.tokenRoleMasks[i];
    if (rewards.length !== mask.length) {
      return {
        ok: false,
        error:
          `reward array length ${rewards.length} does not match ` +
          `mask length ${mask.length}`,
      } satisfies RewardError;
    }
    return {
      ok: true,
      personaId: wire.persona_id ?? "",
      components: wire.components ?? {},
      weightsUsed: wire.weights_used ?? {},
      aggregate: wire.aggregate ?? 0,
      rewards,
    } satisfies RewardBreakdown;
  });
}
