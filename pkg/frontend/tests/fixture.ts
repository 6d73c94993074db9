import type { Decision, Opportunity } from "../src/api.js";

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export interface Conclusion {
  decisions: Record<string, Decision>;
  fallback_warning: boolean;
}

/**
 * Scripted stand-in for the screener service: a fixed question sequence that
 * concludes with a fixed decision payload, plus the wire error codes the real
 * service emits. `fetch` is bound so it can be stubbed in as the global.
 */
export class FakeService {
  readonly requests: string[] = [];
  answers: string[] = [];
  sessionId = "sess-fixture";
  /** Reject the next request as if the network dropped. */
  failNext = false;

  constructor(
    readonly opportunities: Opportunity[],
    readonly questions: string[],
    readonly conclusion: Conclusion,
    readonly maxTurns = 20,
  ) {}

  view(): Record<string, unknown> {
    const base = {
      session_id: this.sessionId,
      turns_used: this.answers.length,
      max_turns: this.maxTurns,
    };
    if (this.answers.length >= this.questions.length) {
      return {
        ...base,
        state: "concluded",
        decisions: this.conclusion.decisions,
        fallback_warning: this.conclusion.fallback_warning,
      };
    }
    return {
      ...base,
      state: "awaiting_answer",
      current_question: this.questions[this.answers.length],
    };
  }

  fetch = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const url = String(input);
    const method = (init?.method ?? "GET").toUpperCase();
    this.requests.push(`${method} ${url}`);
    if (this.failNext) {
      this.failNext = false;
      throw new TypeError("fetch failed");
    }

    if (method === "GET" && url.endsWith("/v1/opportunities")) {
      return json(200, this.opportunities);
    }

    if (method === "POST" && url.endsWith("/v1/sessions")) {
      const ids: string[] = JSON.parse(String(init?.body)).opportunity_ids;
      if (ids.length === 0) {
        return json(422, { code: "empty_opportunities", message: "select at least one opportunity" });
      }
      const known = new Set(this.opportunities.map((opp) => opp.opportunity_id));
      for (const oid of ids) {
        if (!known.has(oid)) {
          return json(404, { code: "unknown_opportunity", message: `unknown opportunity: ${oid}` });
        }
      }
      this.answers = [];
      return json(200, this.view());
    }

    const answerMatch = url.match(/\/v1\/sessions\/([^/]+)\/answers$/);
    if (method === "POST" && answerMatch) {
      if (answerMatch[1] !== this.sessionId) {
        return json(404, { code: "unknown_session", message: `unknown session: ${answerMatch[1]}` });
      }
      if (this.answers.length >= this.questions.length) {
        return json(409, { code: "session_concluded", message: "session has already concluded" });
      }
      this.answers.push(JSON.parse(String(init?.body)).answer);
      return json(200, this.view());
    }

    const sessionMatch = url.match(/\/v1\/sessions\/([^/]+)$/);
    if (method === "GET" && sessionMatch) {
      if (sessionMatch[1] !== this.sessionId) {
        return json(404, { code: "unknown_session", message: `unknown session: ${sessionMatch[1]}` });
      }
      return json(200, this.view());
    }

    return json(404, { code: "unknown_route", message: `no route for ${method} ${url}` });
  };
}

/** Two opportunities, three questions, then two decisions. */
export function screeningFixture(): FakeService {
  return new FakeService(
    [
      {
        opportunity_id: "job-training-voucher",
        title: "Job Training Voucher",
        requirements: "At least one working-age adult in the household is out of work.",
      },
      {
        opportunity_id: "snap-groceries",
        title: "Grocery Assistance",
        requirements: "Annual income below 15000 plus 7000 per household member.",
      },
    ],
    [
      "How many members are in the household? (an integer between 1 and 6)",
      "What is the annual income of the household? (a number between 0 and 250000)",
      "What is the employed of person 0? (one of: yes, no)",
    ],
    {
      decisions: {
        "job-training-voucher": {
          eligible: true,
          rationale: [
            "let jobless_adults = 0",
            'if member["employed"] == "no" {',
            "return jobless_adults >= 1",
          ],
          predicted: false,
        },
        "snap-groceries": {
          eligible: true,
          rationale: ['return hh["annual_income"] < 15000 + 7000 * hh["size"]'],
          predicted: false,
        },
      },
      fallback_warning: false,
    },
  );
}
