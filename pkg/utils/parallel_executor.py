import asyncio
import concurrent.futures
import sys
import time
import traceback
from typing import Any, Callable, Dict, List, Optional

from tqdm import tqdm

from config import get_worker_limit


def _call(worker: Callable[[Dict[str, Any]], Dict[str, Any]], task: Dict[str, Any]) -> Dict[str, Any]:
    """在工作进程中执行单个任务；异常转换为带 error 字段的结果"""
    start_time = time.time()
    try:
        result = worker(task)
    except Exception as e:
        result = {"error": f"{type(e).__name__}: {e}", "traceback": traceback.format_exc()}
    result["execution_time"] = time.time() - start_time
    return result


class ParallelRunExecutor:
    """
    并行运行执行器，用于把独立的优化运行（种子、扫描点）分发到进程池
    支持限制并发、错误以字典返回、进度条与进度回调
    """

    def __init__(self, workers: Optional[int] = None, show_progress: bool = True):
        """
        初始化并行执行器

        Args:
            workers: 并行进程数，缺省由 get_worker_limit 决定；1 表示在当前进程内顺序执行
            show_progress: 是否在控制台显示进度条
        """
        self.workers = workers or get_worker_limit()
        self.show_progress = show_progress
        self.completed_count = 0
        self.total_count = 0
        self.progress_bar = None

    async def execute_batch(self,
                            worker: Callable[[Dict[str, Any]], Dict[str, Any]],
                            tasks: List[Dict[str, Any]],
                            progress_callback: Optional[Callable[[int, int], None]] = None,
                            description: str = "执行优化运行") -> List[Dict[str, Any]]:
        """
        批量执行任务

        Args:
            worker: 可序列化的顶层函数，输入任务字典，返回结果字典
            tasks: 任务列表
            progress_callback: 进度回调函数，参数为(当前完成数, 总数)
            description: 进度条描述

        Returns:
            结果列表，顺序与任务列表对应；失败的任务对应 {"error": ..., "context": 任务}
        """
        self.total_count = len(tasks)
        self.completed_count = 0
        if self.show_progress:
            self.progress_bar = tqdm(total=self.total_count, desc=description, file=sys.stdout)

        try:
            if self.workers <= 1:
                results = []
                for task in tasks:
                    results.append(self._finish(_call(worker, task), task, progress_callback))
                return results

            loop = asyncio.get_running_loop()
            semaphore = asyncio.Semaphore(self.workers)
            with concurrent.futures.ProcessPoolExecutor(max_workers=self.workers) as pool:
                async def run_one(task: Dict[str, Any]) -> Dict[str, Any]:
                    async with semaphore:
                        try:
                            result = await loop.run_in_executor(pool, _call, worker, task)
                        except Exception as e:  # 进程池本身失败（例如子进程被终止）
                            result = {"error": f"{type(e).__name__}: {e}"}
                        return self._finish(result, task, progress_callback)

                return await asyncio.gather(*(run_one(task) for task in tasks))
        finally:
            if self.progress_bar:
                self.progress_bar.close()
                self.progress_bar = None

    def _finish(self,
                result: Dict[str, Any],
                task: Dict[str, Any],
                progress_callback: Optional[Callable[[int, int], None]]) -> Dict[str, Any]:
        if "error" in result:
            result["context"] = task
        self.completed_count += 1
        if self.progress_bar:
            self.progress_bar.update(1)
            self.progress_bar.set_description(f"执行优化运行 [{self.completed_count}/{self.total_count}]")
        if progress_callback:
            progress_callback(self.completed_count, self.total_count)
        return result

    def execute_batch_sync(self,
                           worker: Callable[[Dict[str, Any]], Dict[str, Any]],
                           tasks: List[Dict[str, Any]],
                           progress_callback: Optional[Callable[[int, int], None]] = None,
                           description: str = "执行优化运行") -> List[Dict[str, Any]]:
        """同步版本的批量执行方法"""
        loop = asyncio.new_event_loop()
        try:
            return loop.run_until_complete(self.execute_batch(worker, tasks, progress_callback, description))
        finally:
            loop.close()


def run_parallel(worker: Callable[[Dict[str, Any]], Dict[str, Any]],
                 tasks: List[Dict[str, Any]],
                 workers: Optional[int] = None,
                 show_progress: bool = True,
                 progress_callback: Optional[Callable[[int, int], None]] = None) -> List[Dict[str, Any]]:
    """同步执行一批独立任务的便捷函数"""
    executor = ParallelRunExecutor(workers=workers, show_progress=show_progress)
    return executor.execute_batch_sync(worker, tasks, progress_callback)
