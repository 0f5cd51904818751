// Keyboard -> nominal command. Bang-bang at the control-box limits so the
// operator exercises the filter hard: arrows steer the Dubins car, WASD
// accelerates the integrator.

export type RobotKind = "dubins" | "integrator2d";

export const DUBINS_OMEGA = 0.5;
export const INTEGRATOR_ACCEL = 1.0;

export class KeyTracker {
  private down = new Set<string>();

  press(code: string): void {
    this.down.add(code);
  }

  release(code: string): void {
    this.down.delete(code);
  }

  clear(): void {
    this.down.clear();
  }

  has(code: string): boolean {
    return this.down.has(code);
  }
}

export function commandFor(kind: RobotKind, keys: KeyTracker): number[] {
  if (kind === "dubins") {
    let omega = 0;
    if (keys.has("ArrowLeft")) omega += DUBINS_OMEGA;
    if (keys.has("ArrowRight")) omega -= DUBINS_OMEGA;
    return [omega];
  }
  let ax = 0;
  let ay = 0;
  if (keys.has("KeyD")) ax += INTEGRATOR_ACCEL;
  if (keys.has("KeyA")) ax -= INTEGRATOR_ACCEL;
  if (keys.has("KeyW")) ay += INTEGRATOR_ACCEL;
  if (keys.has("KeyS")) ay -= INTEGRATOR_ACCEL;
  return [ax, ay];
}

export const COMMAND_HZ = 30;

/**
 * Fixed-rate command pump: ticks at most at COMMAND_HZ regardless of how
 * often the browser fires key events. `schedule` is injectable for tests.
 */
export class CommandLoop {
  private timer: ReturnType<typeof setInterval> | null = null;
  sent = 0;

  constructor(
    private readonly send: (u: number[]) => void,
    private readonly current: () => number[],
  ) {}

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => {
      this.send(this.current());
      this.sent += 1;
    }, 1000 / COMMAND_HZ);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
