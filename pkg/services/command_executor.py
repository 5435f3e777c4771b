"""External command execution for codec and quality-metric tools."""

import asyncio
import logging
import shlex
import time
from datetime import datetime, timezone
from string import Formatter
from typing import Any, List, Mapping, Optional, Set, Tuple

from models import CommandRequest, CommandResult


logger = logging.getLogger(__name__)


def template_fields(template: str) -> Set[str]:
    """Placeholder names used by a command template."""
    names = set()
    for _, field_name, _, _ in Formatter().parse(template):
        if field_name is not None:
            if not field_name or not field_name.isidentifier():
                raise ValueError(f"Invalid placeholder {{{field_name}}} in command template")
            names.add(field_name)
    return names


def build_command(template: str, params: Mapping[str, Any],
                  allowed: Optional[Set[str]] = None) -> List[str]:
    """Split a template into argv and fill the placeholders token by token."""
    fields = template_fields(template)
    if allowed is not None and fields - allowed:
        raise ValueError(f"Unknown placeholders {sorted(fields - allowed)}; allowed: {sorted(allowed)}")
    missing = fields - set(params)
    if missing:
        raise ValueError(f"No value for placeholders {sorted(missing)}")
    argv = [token.format(**params) for token in shlex.split(template)]
    if not argv:
        raise ValueError("Empty command template")
    return argv


class CommandExecutor:
    """Runs templated commands as subprocesses with a timeout."""

    def __init__(self, allowed_placeholders: Optional[Set[str]] = None,
                 cwd: Optional[str] = None):
        self.allowed_placeholders = allowed_placeholders
        self.cwd = cwd

    async def execute_command(self, request: CommandRequest) -> CommandResult:
        """Execute a command and return structured results."""
        start_time = time.time()

        try:
            argv = build_command(request.template, request.params, self.allowed_placeholders)
        except (ValueError, KeyError, IndexError) as e:
            return CommandResult(
                command=request.template,
                success=False,
                output="",
                error=f"Invalid command template: {e}",
                execution_time=0.0,
                timestamp=datetime.now(timezone.utc)
            )

        command = shlex.join(argv)
        try:
            logger.info(f"Executing command: {command}")
            return_code, output = await self._run_command(argv, request.timeout)
            execution_time = time.time() - start_time
            success = return_code == 0
            if not success:
                logger.error(f"Command exited with code {return_code}: {command}")
            return CommandResult(
                command=command,
                success=success,
                output=output,
                error=None if success else f"Exit code {return_code}",
                execution_time=execution_time,
                timestamp=datetime.now(timezone.utc),
                return_code=return_code
            )

        except Exception as e:
            execution_time = time.time() - start_time
            logger.error(f"Command execution failed: {e}")

            return CommandResult(
                command=command,
                success=False,
                output="",
                error=str(e),
                execution_time=execution_time,
                timestamp=datetime.now(timezone.utc)
            )

    async def _run_command(self, argv: List[str], timeout: int) -> Tuple[int, str]:
        """Run argv, returning the exit code and combined output."""
        process = await asyncio.create_subprocess_exec(
            *argv,
            stdout=asyncio.subprocess.PIPE,
            stderr=asyncio.subprocess.PIPE,
            cwd=self.cwd
        )

        try:
            stdout, stderr = await asyncio.wait_for(process.communicate(), timeout=timeout)
        except asyncio.TimeoutError:
            process.kill()
            await process.wait()
            raise ValueError(f"Command timed out after {timeout} seconds")

        output = stdout.decode('utf-8', errors='replace')
        if stderr:
            error_output = stderr.decode('utf-8', errors='replace')
            output += f"\nSTDERR:\n{error_output}"

        return process.returncode, output.strip()
